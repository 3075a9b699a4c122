#include "rkme/market.hpp"

#include <cstdint>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "rkme/errors.hpp"

namespace rkme {

namespace {

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string now_iso8601() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const std::filesystem::path& path, const std::string& entry_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IntegrityError("entry '" + entry_id + "': missing file " + path.filename().string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << bytes;
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

std::string entry_hash(const std::string& spec_bytes, const std::string& model_bytes,
                       const std::string& meta_bytes) {
    std::uint64_t h = fnv1a64(spec_bytes);
    h = fnv1a64(model_bytes, h);
    h = fnv1a64(meta_bytes, h);
    return to_hex(h);
}

void check_id(const std::string& id) {
    if (id.empty()) throw InputError("entry id must be non-empty");
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '-' || c == '.';
        if (!ok) throw InputError("entry id '" + id + "' contains characters outside [A-Za-z0-9_.-]");
    }
    if (id == "." || id == "..") throw InputError("entry id must not be a relative path");
}

nlohmann::json meta_to_json(const EntryMeta& meta) {
    return nlohmann::json{{"provider", meta.provider}, {"task", meta.task}, {"created", meta.created}};
}

EntryMeta meta_from_json(const nlohmann::json& j) {
    EntryMeta meta;
    meta.provider = j.value("provider", std::string{});
    meta.task = j.value("task", std::string{});
    meta.created = j.value("created", std::string{});
    return meta;
}

// Exclusive advisory lock; held for the duration of an upload.
class PoolLock {
public:
    explicit PoolLock(std::filesystem::path path) : path_(std::move(path)) {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            throw ConflictError("pool is locked by another writer (remove '" + path_.string() +
                                "' if stale)");
        }
    }
    ~PoolLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            std::error_code ec;
            std::filesystem::remove(path_, ec);
        }
    }
    PoolLock(const PoolLock&) = delete;
    PoolLock& operator=(const PoolLock&) = delete;

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

} // namespace

bool Pool::exists(const std::filesystem::path& root) {
    return std::filesystem::exists(root / "manifest.json");
}

Pool Pool::create(const std::filesystem::path& root, const KernelConfig& kernel) {
    kernel.validate();
    if (exists(root)) throw ConflictError("pool already exists at '" + root.string() + "'");
    std::filesystem::create_directories(root);
    Pool pool;
    pool.root_ = root;
    pool.kernel_ = kernel;
    pool.save_manifest();
    return pool;
}

Pool Pool::load(const std::filesystem::path& root) {
    const auto manifest_path = root / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw InputError("no pool manifest at '" + manifest_path.string() + "'");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("corrupt pool manifest: " + std::string(e.what()));
    }

    Pool pool;
    pool.root_ = root;
    try {
        pool.kernel_ = manifest.at("kernel").get<KernelConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("corrupt pool manifest: " + std::string(e.what()));
    }

    for (const auto& item : manifest.at("entries")) {
        Stored stored;
        std::string recorded_hash;
        try {
            stored.entry.id = item.at("id").get<std::string>();
            recorded_hash = item.at("hash").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw IntegrityError("corrupt pool manifest entry: " + std::string(e.what()));
        }
        const auto dir = root / stored.entry.id;
        const std::string spec_bytes = read_file(dir / "spec.json", stored.entry.id);
        const std::string model_bytes = read_file(dir / "model.json", stored.entry.id);
        const std::string meta_bytes = read_file(dir / "meta.json", stored.entry.id);
        stored.hash = entry_hash(spec_bytes, model_bytes, meta_bytes);
        if (stored.hash != recorded_hash) {
            throw IntegrityError("entry '" + stored.entry.id + "': content hash mismatch (expected " +
                                 recorded_hash + ", found " + stored.hash + ")");
        }
        try {
            stored.entry.spec = nlohmann::json::parse(spec_bytes).get<Rkme>();
            stored.entry.meta = meta_from_json(nlohmann::json::parse(meta_bytes));
        } catch (const nlohmann::json::exception& e) {
            throw IntegrityError("entry '" + stored.entry.id + "': unparsable files: " + e.what());
        }
        if (!(stored.entry.spec.kernel == pool.kernel_)) {
            throw IntegrityError("entry '" + stored.entry.id + "': kernel differs from the pool kernel");
        }
        pool.entries_.push_back(std::move(stored));
    }
    return pool;
}

const LearnwareEntry& Pool::upload(const Dataset& data, const ModelRef& model, Eigen::Index M,
                                   const std::string& id, const EntryMeta& meta,
                                   const UploadOptions& opts) {
    data.validate();
    check_id(id);
    if (data.dim() != model.dim) {
        throw InputError("data dimension " + std::to_string(data.dim()) +
                         " does not match model dimension " + std::to_string(model.dim));
    }
    for (const auto& stored : entries_) {
        if (stored.entry.id == id) throw ConflictError("duplicate entry id '" + id + "'");
    }

    PoolLock lock(root_ / ".lock");

    Rkme spec = reduce(kernel_, data.X, M, opts.reduce);
    const std::string created = opts.created.empty() ? now_iso8601() : opts.created;
    spec.meta.created = created;

    // Inaccessibility smoke check: the constructed pseudo-points must not
    // reproduce any raw row exactly.
    for (Eigen::Index m = 0; m < spec.Z.rows(); ++m) {
        for (Eigen::Index i = 0; i < data.X.rows(); ++i) {
            if ((spec.Z.row(m).array() == data.X.row(i).array()).all()) {
                throw IntegrityError("reduced set reproduces raw data row " + std::to_string(i) +
                                     "; refusing to store it");
            }
        }
    }

    Stored stored;
    stored.entry.id = id;
    stored.entry.spec = std::move(spec);
    stored.entry.model = model;
    stored.entry.meta = meta;
    if (stored.entry.meta.created.empty()) stored.entry.meta.created = created;
    stored.model_loaded = true;

    const std::string spec_bytes = nlohmann::json(stored.entry.spec).dump(2) + "\n";
    const std::string model_bytes = nlohmann::json(stored.entry.model).dump(2) + "\n";
    const std::string meta_bytes = meta_to_json(stored.entry.meta).dump(2) + "\n";
    stored.hash = entry_hash(spec_bytes, model_bytes, meta_bytes);

    const auto dir = root_ / id;
    std::filesystem::create_directories(dir);
    write_file(dir / "spec.json", spec_bytes);
    write_file(dir / "model.json", model_bytes);
    write_file(dir / "meta.json", meta_bytes);

    entries_.push_back(std::move(stored));
    save_manifest();
    return entries_.back().entry;
}

std::vector<EntryInfo> Pool::list() const {
    std::vector<EntryInfo> out;
    out.reserve(entries_.size());
    for (const auto& stored : entries_) {
        out.push_back(EntryInfo{stored.entry.id, stored.entry.meta, stored.entry.spec.dim(),
                                stored.entry.spec.size(), stored.hash});
    }
    return out;
}

Eigen::Index Pool::index_of(const std::string& id) const {
    for (Eigen::Index i = 0; i < size(); ++i) {
        if (entries_[static_cast<std::size_t>(i)].entry.id == id) return i;
    }
    throw NotFoundError("no entry with id '" + id + "' in pool '" + root_.string() + "'");
}

const LearnwareEntry& Pool::get(const std::string& id) const {
    const auto i = static_cast<std::size_t>(index_of(id));
    load_model(entries_[i]);
    return entries_[i].entry;
}

const std::string& Pool::id_at(Eigen::Index i) const {
    return entries_.at(static_cast<std::size_t>(i)).entry.id;
}

const Rkme& Pool::spec_at(Eigen::Index i) const {
    return entries_.at(static_cast<std::size_t>(i)).entry.spec;
}

const ModelRef& Pool::model_at(Eigen::Index i) const {
    auto& stored = entries_.at(static_cast<std::size_t>(i));
    load_model(stored);
    return stored.entry.model;
}

void Pool::load_model(Stored& stored) const {
    std::lock_guard<std::mutex> guard(*model_mutex_);
    if (stored.model_loaded) return;
    try {
        stored.entry.model = read_model_json(root_ / stored.entry.id / "model.json");
    } catch (const InputError& e) {
        throw IntegrityError("entry '" + stored.entry.id + "': " + e.what());
    }
    if (stored.entry.model.dim != stored.entry.spec.dim()) {
        throw IntegrityError("entry '" + stored.entry.id + "': model dimension differs from spec");
    }
    stored.model_loaded = true;
}

void Pool::save_manifest() const {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& stored : entries_) {
        entries.push_back(nlohmann::json{{"id", stored.entry.id}, {"hash", stored.hash}});
    }
    const nlohmann::json manifest{{"kernel", kernel_}, {"entries", std::move(entries)}};
    write_file(root_ / "manifest.json", manifest.dump(2) + "\n");
}

} // namespace rkme
