#ifndef RKME_MARKET_HPP
#define RKME_MARKET_HPP

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rkme/dataset.hpp"
#include "rkme/models.hpp"
#include "rkme/rkme.hpp"

namespace rkme {

struct EntryMeta {
    std::string provider;
    std::string task;
    std::string created;
};

struct LearnwareEntry {
    std::string id;
    Rkme spec;
    ModelRef model;
    EntryMeta meta;
};

// Listing row; never touches the stored model blob.
struct EntryInfo {
    std::string id;
    EntryMeta meta;
    Eigen::Index dim = 0;
    Eigen::Index reduced_size = 0;
    std::string hash;
};

struct UploadOptions {
    ReduceOptions reduce{};
    std::string created; // stamped into the entry spec and meta
};

// Directory-backed pool of (model, specification) pairs. Layout:
//   root/manifest.json                      {"kernel": ..., "entries": [{"id","hash"}...]}
//   root/<id>/{spec.json,model.json,meta.json}
// Every spec in a pool shares the pool-wide kernel, so RKHS inner products
// between entries are well defined. Concurrent reads are safe; upload takes
// an exclusive lock file and fails fast if one is already held.
class Pool {
public:
    static Pool create(const std::filesystem::path& root, const KernelConfig& kernel);
    static Pool load(const std::filesystem::path& root);
    static bool exists(const std::filesystem::path& root);

    const std::filesystem::path& root() const { return root_; }
    const KernelConfig& kernel() const { return kernel_; }
    Eigen::Index size() const { return static_cast<Eigen::Index>(entries_.size()); }
    bool empty() const { return entries_.empty(); }

    // Upload phase: reduces data.X to an M-point specification, verifies
    // that no reduced-set row reproduces a raw row, and persists only
    // (spec, model, meta). The raw dataset itself is never written.
    const LearnwareEntry& upload(const Dataset& data, const ModelRef& model, Eigen::Index M,
                                 const std::string& id, const EntryMeta& meta,
                                 const UploadOptions& opts = {});

    std::vector<EntryInfo> list() const;
    const LearnwareEntry& get(const std::string& id) const;

    const std::string& id_at(Eigen::Index i) const;
    const Rkme& spec_at(Eigen::Index i) const;
    const ModelRef& model_at(Eigen::Index i) const; // lazily materialized

    // Rewrites manifest.json from the in-memory state; saving a freshly
    // loaded pool reproduces the file byte for byte.
    void save_manifest() const;

private:
    struct Stored {
        LearnwareEntry entry;
        std::string hash;
        bool model_loaded = false;
    };

    Pool() = default;
    Eigen::Index index_of(const std::string& id) const;
    void load_model(Stored& stored) const;

    std::filesystem::path root_;
    KernelConfig kernel_;
    mutable std::vector<Stored> entries_;
    mutable std::unique_ptr<std::mutex> model_mutex_ = std::make_unique<std::mutex>();
};

} // namespace rkme

#endif
