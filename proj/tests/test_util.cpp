#include <doctest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

#include "matgraph/util.hpp"
#include "support.hpp"

using namespace matgraph;

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("mix_seed is deterministic and order sensitive") {
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(0, 0) != mix_seed(0, 1));
}

TEST_CASE("mean_std uses the population deviation") {
  std::vector<double> one{0.7};
  CHECK(mean_std(one).mean == doctest::Approx(0.7));
  CHECK(mean_std(one).std == 0.0);
  std::vector<double> two{0.4, 0.6};
  CHECK(mean_std(two).mean == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mean_std(two).std == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("format_fixed renders six decimals") {
  CHECK(format_fixed(0.5) == "0.500000");
  CHECK(format_fixed(1.0 / 3.0) == "0.333333");
  CHECK(format_fixed(2.0, 2) == "2.00");
}

TEST_CASE("parallel_for visits every index once") {
  for (int jobs : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(57);
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  auto body = [](std::size_t i) {
    if (i == 4 || i == 9) throw std::runtime_error("task " + std::to_string(i));
  };
  for (int jobs : {1, 4}) {
    try {
      parallel_for(12, jobs, body);
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "task 4");
    }
  }
}

TEST_CASE("text files round trip") {
  testing::TempDir dir("util");
  write_text_file(dir / "a/b.txt", "hello\nworld");
  CHECK(read_text_file(dir / "a/b.txt") == "hello\nworld");
  CHECK_THROWS(read_text_file(dir / "missing.txt"));
}
