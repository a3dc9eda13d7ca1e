#include "mapnn/gateway.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "httplib.h"
#include "mapnn/checkpoint.hpp"
#include "mapnn/png_io.hpp"

namespace mapnn::gateway {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    return ss.str();
}

// Status for a failed request plus the message returned to the client.
struct HttpError {
    int status;
    std::string message;
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const HttpError& e) { send_json(res, e.status, {{"error", e.message}}); }

json parse_body(const httplib::Request& req) {
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw HttpError{400, std::string("malformed JSON body: ") + e.what()};
    }
}

// Runs a handler, mapping toolkit exceptions onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const HttpError& e) {
        send_error(res, e);
    } catch (const stats::ScoreOutOfRange& e) {
        send_error(res, {422, e.what()});
    } catch (const FormatError& e) {
        send_error(res, {400, e.what()});
    } catch (const InvalidArgument& e) {
        send_error(res, {400, e.what()});
    } catch (const IoError& e) {
        send_error(res, {507, e.what()});
    } catch (const json::exception& e) {
        send_error(res, {400, e.what()});
    } catch (const std::exception& e) {
        send_error(res, {500, e.what()});
    }
}

}  // namespace

fs::path data_dir_from_env() {
    const char* v = std::getenv(kDataDirEnv);
    return (v && *v) ? fs::path(v) : fs::path("mapnn-data");
}

std::string depth_png(const ct::Image& unit) { return io::encode_png(io::display_png8(unit)); }

std::shared_ptr<const Model> Model::load(const fs::path& checkpoint) {
    const auto bytes = read_file(checkpoint);
    const auto ckpt = decode_checkpoint(bytes);
    auto m = std::make_shared<Model>();
    m->params = generator_from(ckpt);
    m->training_depth = ckpt.training_depth;
    m->id = checkpoint.filename().string() + "@" + hex64(fnv1a(bytes)).substr(0, 12);
    return m;
}

RatingLog::RatingLog(fs::path path) : path_(std::move(path)) {
    if (!fs::exists(path_)) return;
    std::ifstream in(path_);
    if (!in) throw IoError("cannot open rating log " + path_.string());
    try {
        records_ = stats::read_ratings_jsonl(in);
    } catch (const InvalidArgument& e) {
        throw IoError("rating log " + path_.string() + " is corrupt: " + e.what());
    }
}

void RatingLog::append(const stats::RatingRecord& r) {
    const auto line = stats::rating_to_json(r).dump() + "\n";
    std::lock_guard lock(mu_);
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open rating log " + path_.string() + ": " + std::strerror(errno));
    std::size_t done = 0;
    while (done < line.size()) {
        const auto n = ::write(fd, line.data() + done, line.size() - done);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            const int err = errno;
            ::close(fd);
            throw IoError("cannot append to rating log: " + std::string(std::strerror(err)));
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) throw IoError("cannot flush rating log " + path_.string());
    records_.push_back(r);
}

std::vector<stats::RatingRecord> RatingLog::records() const {
    std::lock_guard lock(mu_);
    return records_;
}

namespace {

fs::path prepared_data_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create data directory " + dir.string() + ": " + ec.message());
    return dir;
}

std::string random_session() {
    std::random_device rd;
    return hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd()).substr(0, 8);
}

int int_field(const json& j, const char* key) {
    if (!j.contains(key)) throw HttpError{400, std::string("missing field '") + key + "'"};
    if (!j.at(key).is_number_integer()) throw HttpError{400, std::string("field '") + key + "' must be an integer"};
    return j.at(key).get<int>();
}

}  // namespace

Service::Service(const ServiceConfig& cfg)
    : cfg_(cfg),
      model_(Model::load(cfg.checkpoint)),
      log_(prepared_data_dir(cfg.data_dir) / "ratings.jsonl"),
      session_(random_session()) {
    cfg_.tiles.validate();
}

std::string Service::next_id(const char* prefix) {
    return std::string(prefix) + "-" + session_ + "-" + std::to_string(++counter_);
}

void Service::mount(httplib::Server& server) {
    server.set_payload_max_length(64u << 20);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200,
                  {{"status", "ok"},
                   {"checkpoint", model_->id},
                   {"training_depth", model_->training_depth},
                   {"max_depth", kMaxInferenceDepth}});
    });

    server.Post("/api/images", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            if (req.body.empty()) throw HttpError{400, "empty body; expected a 16-bit grayscale PNG"};
            auto hu = io::png16_to_hu(io::decode_png(req.body));
            if (hu.rows() < kCpceMinExtent || hu.cols() < kCpceMinExtent) {
                throw HttpError{400, "image smaller than " + std::to_string(kCpceMinExtent) + " pixels"};
            }
            const auto id = next_id("img");
            {
                std::unique_lock lock(store_mu_);
                images_.emplace(id, std::move(hu));
            }
            send_json(res, 201, {{"image_id", id}});
        });
    });

    server.Post("/api/denoise", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = parse_body(req);
            if (!body.is_object()) throw HttpError{400, "expected a JSON object"};
            if (!body.contains("image_id") || !body.at("image_id").is_string()) {
                throw HttpError{400, "field 'image_id' must be a string"};
            }
            const auto image_id = body.at("image_id").get<std::string>();
            const int max_depth = int_field(body, "max_depth");
            std::string window = "abdomen";
            if (body.contains("window")) {
                if (!body.at("window").is_string()) throw HttpError{400, "field 'window' must be a string"};
                window = body.at("window").get<std::string>();
            }
            const auto w = ct::parse_window(window);
            ct::Image hu;
            {
                std::shared_lock lock(store_mu_);
                const auto it = images_.find(image_id);
                if (it == images_.end()) throw HttpError{404, "unknown image id '" + image_id + "'"};
                hu = it->second;
            }
            const auto seq =
                infer::progressive_infer_hu(model_->params, model_->training_depth, hu, max_depth, w, cfg_.tiles);
            auto stored = std::make_shared<StoredSequence>();
            stored->image_id = image_id;
            stored->window = window;
            stored->checkpoint_id = model_->id;
            stored->beyond_training_depth = seq.beyond_training_depth;
            for (const auto& d : seq.depths) stored->pngs.push_back(depth_png(d));
            const auto id = next_id("seq");
            json urls = json::array();
            for (int d = 1; d <= max_depth; ++d) urls.push_back("/api/images/" + id + "?depth=" + std::to_string(d));
            {
                std::unique_lock lock(store_mu_);
                sequences_.emplace(id, std::move(stored));
            }
            send_json(res, 201,
                      {{"sequence_id", id},
                       {"image_id", image_id},
                       {"window", window},
                       {"checkpoint", model_->id},
                       {"beyond_training_depth", seq.beyond_training_depth},
                       {"depths", urls}});
        });
    });

    server.Get(R"(/api/images/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            std::optional<int> depth;
            if (req.has_param("depth")) {
                const auto s = req.get_param_value("depth");
                std::size_t used = 0;
                int d = 0;
                try {
                    d = std::stoi(s, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used == 0 || used != s.size()) throw HttpError{400, "depth must be an integer"};
                depth = d;
            }
            std::shared_ptr<const StoredSequence> seq;
            ct::Image hu;
            {
                std::shared_lock lock(store_mu_);
                if (const auto it = sequences_.find(id); it != sequences_.end()) {
                    seq = it->second;
                } else if (const auto im = images_.find(id); im != images_.end()) {
                    hu = im->second;
                } else {
                    throw HttpError{404, "unknown id '" + id + "'"};
                }
            }
            if (seq) {
                if (!depth) throw HttpError{400, "missing query parameter 'depth'"};
                if (*depth < 1 || *depth > static_cast<int>(seq->pngs.size())) {
                    throw HttpError{404, "sequence '" + id + "' has depths 1.." + std::to_string(seq->pngs.size())};
                }
                res.status = 200;
                res.set_content(seq->pngs[static_cast<std::size_t>(*depth - 1)], "image/png");
                return;
            }
            if (depth && *depth != 0) throw HttpError{404, "uploaded image '" + id + "' has only depth 0"};
            const auto w = ct::parse_window(req.has_param("window") ? req.get_param_value("window") : "abdomen");
            res.status = 200;
            res.set_content(depth_png(ct::hu_window(hu, w)), "image/png");
        });
    });

    server.Post("/api/ratings", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto r = stats::rating_from_json(parse_body(req));
            log_.append(r);
            send_json(res, 201, {{"accepted", true}});
        });
    });

    server.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, stats::stats_report(log_.records())); });
    });
}

bool serve(const ServiceConfig& cfg, const std::string& host, int port) {
    Service service(cfg);
    httplib::Server server;
    service.mount(server);
    return server.listen(host, port);
}

}  // namespace mapnn::gateway
