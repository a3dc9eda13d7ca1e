#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapnn/inference.hpp"
#include "mapnn/stats.hpp"

namespace httplib {
class Server;
}

namespace mapnn::gateway {

/// Environment variable naming the service data directory.
inline constexpr const char* kDataDirEnv = "MAPNN_DATA_DIR";

/// $MAPNN_DATA_DIR, or ./mapnn-data when unset.
std::filesystem::path data_dir_from_env();

/// The bytes written for one depth, by both the CLI and the service.
std::string depth_png(const ct::Image& unit);

/// Loaded generator weights; never modified after construction.
struct Model {
    CpceParams<float> params;
    int training_depth = 5;
    std::string id;  // checkpoint file name and content hash

    /// Throws IoError for unreadable or corrupt checkpoints.
    static std::shared_ptr<const Model> load(const std::filesystem::path& checkpoint);
};

/// Append-only JSON-lines rating log. One writer at a time; every accepted
/// record is on disk (fsync) before append returns.
class RatingLog {
public:
    /// Reads existing records; throws IoError for a malformed log.
    explicit RatingLog(std::filesystem::path path);

    /// Throws IoError when the record cannot be persisted; the in-memory
    /// log is unchanged in that case.
    void append(const stats::RatingRecord& r);
    std::vector<stats::RatingRecord> records() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::vector<stats::RatingRecord> records_;
};

struct ServiceConfig {
    std::filesystem::path checkpoint;
    std::filesystem::path data_dir;
    infer::TileConfig tiles;
};

struct StoredSequence {
    std::string image_id;
    std::string window;
    std::string checkpoint_id;
    bool beyond_training_depth = false;
    std::vector<std::string> pngs;  // depth d at index d-1
};

/// HTTP/JSON front end over progressive inference and the rating log.
///   GET  /api/health
///   POST /api/images            16-bit PNG body -> {image_id}
///   POST /api/denoise           {image_id, max_depth, window} -> {sequence_id, depths}
///   GET  /api/images/{id}       ?depth=d for a sequence, ?window=w for an upload
///   POST /api/ratings           RatingRecord -> {accepted: true}
///   GET  /api/stats
/// Errors are {"error": message} with 400, 404, 422 or 507.
class Service {
public:
    explicit Service(const ServiceConfig& cfg);

    void mount(httplib::Server& server);

    const Model& model() const { return *model_; }
    const RatingLog& ratings() const { return log_; }

private:
    std::string next_id(const char* prefix);

    ServiceConfig cfg_;
    std::shared_ptr<const Model> model_;
    RatingLog log_;
    std::string session_;
    std::atomic<std::uint64_t> counter_{0};

    mutable std::shared_mutex store_mu_;
    std::map<std::string, ct::Image> images_;  // HU
    std::map<std::string, std::shared_ptr<const StoredSequence>> sequences_;
};

/// Blocks until the server stops. Returns false when the port cannot be bound.
bool serve(const ServiceConfig& cfg, const std::string& host, int port);

}  // namespace mapnn::gateway
