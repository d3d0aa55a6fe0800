#pragma once

// HTTP inference over an immutable model snapshot. Handlers are plain
// functions returning (status, JSON) so they can be exercised without a
// socket; HttpFrontend binds them to cpp-httplib routes.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "matgraph/checkpoint.hpp"
#include "matgraph/features.hpp"
#include "matgraph/graph.hpp"
#include "matgraph/ingest.hpp"
#include "matgraph/json.hpp"

namespace matgraph {

struct ServiceOptions {
  std::optional<MaterialCatalog> catalog;       // overrides the checkpoint catalog
  std::shared_ptr<const EmbeddingTable> semantic;  // overrides the checkpoint table path
  std::shared_ptr<const EmbeddingTable> visual;
  bool tier_filter = true;                      // filter outputs by tier constraints
  std::filesystem::path graph_cache;            // empty: uploads kept in memory only
  std::string cors_origin = "*";
};

struct ModelSnapshot {
  Checkpoint checkpoint;
  std::string checkpoint_id;
  std::string path;
  MaterialCatalog catalog;
  std::shared_ptr<const FeatureEncoder> encoder;
};

struct Reply {
  int status = 200;
  json body;
};

class InferenceService {
 public:
  explicit InferenceService(ServiceOptions options = {});

  /// POST /v1/model. 404 when the file is missing, 400 when it does not load.
  Reply load_model(std::string_view request_body);
  Reply load_model_path(const std::filesystem::path& path);
  /// GET /v1/model. 503 before any model is loaded.
  Reply model_info() const;
  /// POST /v1/graphs. Stores an assembly and returns its bundle id.
  Reply upload_graph(std::string_view request_body);
  /// GET /v1/graphs/<id>. Node and edge listing for display.
  Reply graph_info(const std::string& id) const;
  /// POST /v1/predict.
  Reply predict(std::string_view request_body) const;

  std::shared_ptr<const ModelSnapshot> snapshot() const;
  const ServiceOptions& options() const { return options_; }

 private:
  ServiceOptions options_;
  mutable std::mutex model_mutex_;
  std::shared_ptr<const ModelSnapshot> model_;
  mutable std::mutex graphs_mutex_;
  std::map<std::string, std::shared_ptr<const RawAssembly>> graphs_;

  std::shared_ptr<const RawAssembly> find_graph(const std::string& id) const;
};

/// Error body shared by every endpoint: {"error": code, "message": text}.
json error_body(const std::string& code, const std::string& message);

class HttpFrontend {
 public:
  explicit HttpFrontend(InferenceService& service);
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace matgraph
