#pragma once

// Shared helpers for the test executables: fixture paths, scratch
// directories, hand-built graphs and the finite-difference oracle.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "matgraph/features.hpp"
#include "matgraph/graph.hpp"
#include "matgraph/tensor.hpp"
#include "matgraph/util.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace matgraph;

inline fs::path fixture(const std::string& name) { return fs::path(MATGRAPH_FIXTURE_DIR) / name; }

/// Directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("matgraph-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

/// Random features with a bare two-block schema, bidirectional edges of the
/// given kinds and labels drawn uniformly from [0, classes).
inline AssemblyGraph toy_graph(std::size_t n, const std::vector<std::pair<int, int>>& undirected, std::size_t width,
                               std::size_t classes, std::uint64_t seed,
                               const std::vector<ConnectionKind>& kinds = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_int_distribution<int> label(0, static_cast<int>(classes) - 1);
  AssemblyGraph g;
  g.graph_id = "toy-" + std::to_string(seed);
  g.schema.append(block::kBodyPhysical, width - 1, true);
  g.schema.append(block::kGlobal, 1, true);
  g.x = ad::Tensor<float>(n, width);
  for (auto& v : g.x.data) v = normal(rng);
  std::vector<float> attr;
  for (std::size_t i = 0; i < undirected.size(); ++i) {
    const auto [u, v] = undirected[i];
    const auto onehot = encode_connection(kinds.empty() ? ConnectionKind::Contact : kinds[i]);
    for (auto [a, b] : {std::pair{u, v}, std::pair{v, u}}) {
      g.edge_src.push_back(a);
      g.edge_dst.push_back(b);
      attr.insert(attr.end(), onehot.begin(), onehot.end());
    }
  }
  g.edge_attr = ad::Tensor<float>(g.edge_src.size(), kEdgeWidth, std::move(attr));
  for (std::size_t i = 0; i < n; ++i) {
    g.node_ids.push_back("n" + std::to_string(i));
    g.y.push_back(label(rng));
    g.target_mask.push_back(1);
    g.material_ids.push_back("M" + std::to_string(g.y.back()));
  }
  g.check();
  return g;
}

inline ad::Tensor<double> random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  ad::Tensor<double> t(r, c);
  for (auto& v : t.data) v = normal(rng);
  return t;
}

/// ||a - b|| / max(||a||, ||b||, 1e-8).
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

/// Scalar function of a set of leaf tensors, rebuilt on a fresh tape per call.
using ScalarFn = std::function<ad::Var(ad::Tape<double>&, const std::vector<ad::Var>&)>;

/// Norm-wise relative error between the tape gradient and central finite
/// differences (step h), taken over all inputs together:
/// ||g_tape - g_fd|| / max(||g_tape||, ||g_fd||, 1e-8).
inline double gradient_error(std::vector<ad::Tensor<double>>& inputs, const ScalarFn& f, double h = 1e-3) {
  auto evaluate = [&]() {
    ad::Tape<double> tape;
    std::vector<ad::Var> vars;
    for (auto& in : inputs) vars.push_back(tape.constant(in));
    return tape.value(f(tape, vars)).data.at(0);
  };
  std::vector<double> analytic, numeric;
  {
    ad::Tape<double> tape;
    std::vector<ad::Var> vars;
    for (auto& in : inputs) {
      in.requires_grad = true;
      in.zero_grad();
      vars.push_back(tape.leaf(in));
    }
    tape.backward(f(tape, vars));
    for (auto& in : inputs) analytic.insert(analytic.end(), in.grad.begin(), in.grad.end());
  }
  for (auto& in : inputs)
    for (auto& v : in.data) {
      const double saved = v;
      v = saved + h;
      const double up = evaluate();
      v = saved - h;
      const double down = evaluate();
      v = saved;
      numeric.push_back((up - down) / (2 * h));
    }
  return relative_error(analytic, numeric);
}

/// Weighted reduction that makes every output element matter: sum(diag(r) Y w).
inline ad::Var project(ad::Tape<double>& t, ad::Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& Y = t.value(y);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> rows(Y.rows);
  for (auto& v : rows) v = u(rng);
  ad::Var w = t.constant(random_tensor(Y.cols, 1, rng));
  return t.sum(t.matmul(t.scale_rows(y, rows), w));
}

}  // namespace testing
