#pragma once

// Mount-independent filesystem state machine. Maps POSIX-style operations
// onto a root directory, either as a pure loopback (the benchmark baseline)
// or with the protection engine on the read/write paths. Everything here is
// exercisable without kernel privileges; the adapter is a thin shell.

#include <dirent.h>
#include <fcntl.h>
#include <sys/stat.h>
#include <sys/statvfs.h>
#include <sys/time.h>
#include <sys/types.h>
#include <sys/xattr.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dlpfs/common.hpp"
#include "dlpfs/engine.hpp"
#include "dlpfs/policy.hpp"

namespace dlpfs {

// Every byte that reaches the backing filesystem goes through this
// interface, which is what lets tests audit path containment with a
// recording shim.
class BackingStore {
 public:
  virtual ~BackingStore() = default;

  virtual void lstat(const std::string& path, struct ::stat* out) = 0;
  virtual std::vector<std::string> list_dir(const std::string& path) = 0;
  virtual int open(const std::string& path, int flags, mode_t mode) = 0;
  virtual void close(int fd) = 0;
  virtual bytes pread(int fd, uint64_t offset, size_t n) = 0;
  virtual size_t pwrite(int fd, uint64_t offset, bytes_view data) = 0;
  virtual uint64_t file_size(int fd) = 0;
  virtual void fsync(int fd) = 0;
  virtual void truncate(const std::string& path, uint64_t length) = 0;
  virtual void unlink(const std::string& path) = 0;
  virtual void rename(const std::string& from, const std::string& to) = 0;
  virtual void mkdir(const std::string& path, mode_t mode) = 0;
  virtual void rmdir(const std::string& path) = 0;
  virtual bytes readlink(const std::string& path) = 0;
  virtual std::optional<std::string> realpath(const std::string& path) = 0;
  virtual void chmod(const std::string& path, mode_t mode) = 0;
  virtual void chown(const std::string& path, uid_t uid, gid_t gid) = 0;
  virtual void utimens(const std::string& path, const struct timespec tv[2]) = 0;
  virtual void statfs(const std::string& path, struct ::statvfs* out) = 0;
  virtual bytes getxattr(const std::string& path, const std::string& name) = 0;
  virtual void setxattr(const std::string& path, const std::string& name,
                        bytes_view value, int flags) = 0;
  virtual std::vector<std::string> listxattr(const std::string& path) = 0;
  virtual void removexattr(const std::string& path, const std::string& name) = 0;
};

class PosixBackingStore : public BackingStore {
 public:
  void lstat(const std::string& path, struct ::stat* out) override {
    if (::lstat(path.c_str(), out) != 0) throw FsError(errno, "lstat " + path);
  }

  std::vector<std::string> list_dir(const std::string& path) override {
    DIR* d = ::opendir(path.c_str());
    if (!d) throw FsError(errno, "opendir " + path);
    std::vector<std::string> names;
    while (struct dirent* ent = ::readdir(d)) {
      std::string name = ent->d_name;
      if (name != "." && name != "..") names.push_back(std::move(name));
    }
    ::closedir(d);
    return names;
  }

  int open(const std::string& path, int flags, mode_t mode) override {
    int fd = ::open(path.c_str(), flags, mode);
    if (fd < 0) throw FsError(errno, "open " + path);
    return fd;
  }

  void close(int fd) override { ::close(fd); }

  bytes pread(int fd, uint64_t offset, size_t n) override {
    bytes out(n, '\0');
    size_t got = 0;
    while (got < n) {
      ssize_t r = ::pread(fd, out.data() + got, n - got,
                          static_cast<off_t>(offset + got));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw FsError(errno, "pread");
      }
      if (r == 0) break;
      got += static_cast<size_t>(r);
    }
    out.resize(got);
    return out;
  }

  size_t pwrite(int fd, uint64_t offset, bytes_view data) override {
    size_t put = 0;
    while (put < data.size()) {
      ssize_t r = ::pwrite(fd, data.data() + put, data.size() - put,
                           static_cast<off_t>(offset + put));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw FsError(errno, "pwrite");
      }
      put += static_cast<size_t>(r);
    }
    return put;
  }

  uint64_t file_size(int fd) override {
    struct ::stat st;
    if (::fstat(fd, &st) != 0) throw FsError(errno, "fstat");
    return static_cast<uint64_t>(st.st_size);
  }

  void fsync(int fd) override {
    if (::fsync(fd) != 0) throw FsError(errno, "fsync");
  }

  void truncate(const std::string& path, uint64_t length) override {
    if (::truncate(path.c_str(), static_cast<off_t>(length)) != 0)
      throw FsError(errno, "truncate " + path);
  }

  void unlink(const std::string& path) override {
    if (::unlink(path.c_str()) != 0) throw FsError(errno, "unlink " + path);
  }

  void rename(const std::string& from, const std::string& to) override {
    if (::rename(from.c_str(), to.c_str()) != 0)
      throw FsError(errno, "rename " + from);
  }

  void mkdir(const std::string& path, mode_t mode) override {
    if (::mkdir(path.c_str(), mode) != 0) throw FsError(errno, "mkdir " + path);
  }

  void rmdir(const std::string& path) override {
    if (::rmdir(path.c_str()) != 0) throw FsError(errno, "rmdir " + path);
  }

  bytes readlink(const std::string& path) override {
    bytes buf(4096, '\0');
    ssize_t r = ::readlink(path.c_str(), buf.data(), buf.size());
    if (r < 0) throw FsError(errno, "readlink " + path);
    buf.resize(static_cast<size_t>(r));
    return buf;
  }

  std::optional<std::string> realpath(const std::string& path) override {
    char* rp = ::realpath(path.c_str(), nullptr);
    if (!rp) return std::nullopt;
    std::string out(rp);
    ::free(rp);
    return out;
  }

  void chmod(const std::string& path, mode_t mode) override {
    if (::chmod(path.c_str(), mode) != 0) throw FsError(errno, "chmod " + path);
  }

  void chown(const std::string& path, uid_t uid, gid_t gid) override {
    if (::lchown(path.c_str(), uid, gid) != 0)
      throw FsError(errno, "chown " + path);
  }

  void utimens(const std::string& path, const struct timespec tv[2]) override {
    if (::utimensat(AT_FDCWD, path.c_str(), tv, AT_SYMLINK_NOFOLLOW) != 0)
      throw FsError(errno, "utimens " + path);
  }

  void statfs(const std::string& path, struct ::statvfs* out) override {
    if (::statvfs(path.c_str(), out) != 0)
      throw FsError(errno, "statvfs " + path);
  }

  bytes getxattr(const std::string& path, const std::string& name) override {
    ssize_t n = ::lgetxattr(path.c_str(), name.c_str(), nullptr, 0);
    if (n < 0) throw FsError(errno, "getxattr " + path);
    bytes out(static_cast<size_t>(n), '\0');
    n = ::lgetxattr(path.c_str(), name.c_str(), out.data(), out.size());
    if (n < 0) throw FsError(errno, "getxattr " + path);
    out.resize(static_cast<size_t>(n));
    return out;
  }

  void setxattr(const std::string& path, const std::string& name,
                bytes_view value, int flags) override {
    if (::lsetxattr(path.c_str(), name.c_str(), value.data(), value.size(),
                    flags) != 0)
      throw FsError(errno, "setxattr " + path);
  }

  std::vector<std::string> listxattr(const std::string& path) override {
    ssize_t n = ::llistxattr(path.c_str(), nullptr, 0);
    if (n < 0) throw FsError(errno, "listxattr " + path);
    bytes buf(static_cast<size_t>(n), '\0');
    n = ::llistxattr(path.c_str(), buf.data(), buf.size());
    if (n < 0) throw FsError(errno, "listxattr " + path);
    std::vector<std::string> names;
    size_t start = 0;
    for (size_t i = 0; i < static_cast<size_t>(n); ++i) {
      if (buf[i] == '\0') {
        if (i > start) names.emplace_back(buf.data() + start, i - start);
        start = i + 1;
      }
    }
    return names;
  }

  void removexattr(const std::string& path, const std::string& name) override {
    if (::lremovexattr(path.c_str(), name.c_str()) != 0)
      throw FsError(errno, "removexattr " + path);
  }
};

inline std::shared_ptr<BackingStore> make_posix_store() {
  return std::make_shared<PosixBackingStore>();
}

enum class FsType { Loopback, Dlpfs };

struct MountConfig {
  FsType fs_type = FsType::Loopback;
  std::string root;
  std::string mountpoint;  // used by the adapter; may be empty for library use
  std::optional<std::string> policy_path;
  GuardConfig guard;       // format_mode is a default; suffixes may override
  bool auto_line_mode = true;
  bool guard_explicit = false;  // false: size guards from the policy extent
  uint64_t mount_secret = 0;    // 0 picks a random secret
  size_t max_match_bytes = 1024;
};

inline bool path_contains(const std::string& outer, const std::string& inner) {
  if (inner.size() < outer.size()) return false;
  if (inner.compare(0, outer.size(), outer) != 0) return false;
  return inner.size() == outer.size() || inner[outer.size()] == '/';
}

// Lexical normalisation of a mount-relative path. Rejects any traversal that
// would escape the root.
inline std::string normalize_rel_path(const std::string& in) {
  std::vector<std::string> parts;
  size_t i = 0;
  while (i < in.size()) {
    size_t j = in.find('/', i);
    if (j == std::string::npos) j = in.size();
    std::string part = in.substr(i, j - i);
    if (part == "..") {
      if (parts.empty()) throw FsError(EACCES, "path escapes root: " + in);
      parts.pop_back();
    } else if (!part.empty() && part != ".") {
      parts.push_back(std::move(part));
    }
    i = j + 1;
  }
  std::string out;
  for (size_t k = 0; k < parts.size(); ++k) {
    if (k) out += '/';
    out += parts[k];
  }
  return out;
}

class Vfs {
 public:
  explicit Vfs(MountConfig cfg,
               std::shared_ptr<BackingStore> store = make_posix_store())
      : cfg_(std::move(cfg)), store_(std::move(store)) {
    struct ::stat st;
    store_->lstat(cfg_.root, &st);
    if (!S_ISDIR(st.st_mode)) throw FsError(ENOTDIR, cfg_.root);
    auto rp = store_->realpath(cfg_.root);
    if (!rp) throw FsError(ENOENT, cfg_.root);
    root_real_ = *rp;

    if (cfg_.fs_type == FsType::Dlpfs) {
      if (cfg_.policy_path) {
        std::ifstream in(*cfg_.policy_path, std::ios::binary);
        if (!in) throw FsError(ENOENT, "policy " + *cfg_.policy_path);
        bytes content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
        ParseOptions opts;
        opts.max_match_bytes = cfg_.max_match_bytes;
        PolicySpec spec = parse_policy(content, opts);
        auto base = std::filesystem::path(*cfg_.policy_path).parent_path();
        TransformTables tables = load_transform_tables(spec, base);
        policy_ = CompiledPolicy::make(std::move(spec), std::move(tables));
      } else {
        // No behaviour specification: the engine is engaged but detects
        // nothing, a pure passthrough.
        policy_ = empty_policy();
      }
      if (!cfg_.guard_explicit) {
        size_t g = std::max<size_t>(64, policy_->extent);
        cfg_.guard.left_guard = cfg_.guard.right_guard = g;
      }
      cfg_.guard.clamp_to_cap();
    } else {
      policy_ = empty_policy();
    }
    secret_ = cfg_.mount_secret;
    if (secret_ == 0) secret_ = std::random_device{}();
  }

  ~Vfs() {
    std::lock_guard<std::mutex> lk(table_mu_);
    for (auto& [id, h] : handles_) {
      try {
        if (h->prot) h->prot->settle();
      } catch (...) {
      }
      store_->close(h->fd);
    }
    handles_.clear();
  }

  const MountConfig& config() const { return cfg_; }
  const CompiledPolicy& policy() const { return *policy_; }

  struct ::stat getattr(const std::string& path) {
    struct ::stat st;
    store_->lstat(resolve_nofollow(path), &st);
    return st;
  }

  std::vector<std::string> readdir(const std::string& path) {
    return store_->list_dir(resolve(path));
  }

  bytes readlink(const std::string& path) {
    return store_->readlink(resolve_nofollow(path));
  }

  uint64_t open(const std::string& path, int flags) {
    return open_common(path, flags & ~O_CREAT, 0, false);
  }

  uint64_t create(const std::string& path, int flags, mode_t mode) {
    std::lock_guard<std::mutex> dk(dir_mu_);
    return open_common(path, flags | O_CREAT, mode, true);
  }

  bytes read(uint64_t handle, uint64_t offset, size_t n) {
    auto h = get_handle(handle);
    std::lock_guard<std::mutex> lk(h->mu);
    refresh_cache_generation(*h);
    if (h->prot) return h->prot->read(offset, n);
    return store_->pread(h->fd, offset, n);
  }

  size_t write(uint64_t handle, uint64_t offset, bytes_view data) {
    auto h = get_handle(handle);
    std::lock_guard<std::mutex> lk(h->mu);
    size_t n;
    if (h->prot) {
      refresh_cache_generation(*h);
      n = h->prot->write(offset, data);
    } else {
      n = store_->pwrite(h->fd, offset, data);
    }
    write_gen_.fetch_add(1, std::memory_order_relaxed);
    return n;
  }

  void flush(uint64_t handle) {
    auto h = get_handle(handle);
    std::lock_guard<std::mutex> lk(h->mu);
    if (h->prot && h->prot->dirty()) {
      h->prot->settle();
      write_gen_.fetch_add(1, std::memory_order_relaxed);
    }
  }

  void fsync(uint64_t handle) {
    flush(handle);
    auto h = get_handle(handle);
    std::lock_guard<std::mutex> lk(h->mu);
    store_->fsync(h->fd);
  }

  void release(uint64_t handle) {
    std::shared_ptr<Handle> h;
    {
      std::lock_guard<std::mutex> lk(table_mu_);
      auto it = handles_.find(handle);
      if (it == handles_.end()) throw FsError(EBADF, "release");
      h = it->second;
      handles_.erase(it);
    }
    std::lock_guard<std::mutex> lk(h->mu);
    std::optional<FsError> deferred;
    if (h->prot) {
      try {
        h->prot->settle();
        write_gen_.fetch_add(1, std::memory_order_relaxed);
      } catch (const FsError& e) {
        deferred = e;
      }
    }
    store_->close(h->fd);
    if (deferred) throw *deferred;
  }

  void unlink(const std::string& path) {
    std::lock_guard<std::mutex> dk(dir_mu_);
    store_->unlink(resolve_nofollow(path));
  }

  void truncate(const std::string& path, uint64_t length) {
    store_->truncate(resolve(path), length);
    write_gen_.fetch_add(1, std::memory_order_relaxed);
  }

  void rename(const std::string& from, const std::string& to) {
    std::lock_guard<std::mutex> dk(dir_mu_);
    store_->rename(resolve_nofollow(from), resolve_for_create(to));
  }

  void mkdir(const std::string& path, mode_t mode) {
    std::lock_guard<std::mutex> dk(dir_mu_);
    store_->mkdir(resolve_for_create(path), mode);
  }

  void rmdir(const std::string& path) {
    std::lock_guard<std::mutex> dk(dir_mu_);
    store_->rmdir(resolve_nofollow(path));
  }

  void chmod(const std::string& path, mode_t mode) {
    store_->chmod(resolve(path), mode);
  }

  void chown(const std::string& path, uid_t uid, gid_t gid) {
    store_->chown(resolve_nofollow(path), uid, gid);
  }

  void utimens(const std::string& path, const struct timespec tv[2]) {
    store_->utimens(resolve_nofollow(path), tv);
  }

  void statfs(const std::string& path, struct ::statvfs* out) {
    store_->statfs(resolve(path), out);
  }

  bytes getxattr(const std::string& path, const std::string& name) {
    return store_->getxattr(resolve_nofollow(path), name);
  }

  void setxattr(const std::string& path, const std::string& name,
                bytes_view value, int flags) {
    store_->setxattr(resolve_nofollow(path), name, value, flags);
  }

  std::vector<std::string> listxattr(const std::string& path) {
    return store_->listxattr(resolve_nofollow(path));
  }

  void removexattr(const std::string& path, const std::string& name) {
    store_->removexattr(resolve_nofollow(path), name);
  }

  size_t open_handle_count() {
    std::lock_guard<std::mutex> lk(table_mu_);
    return handles_.size();
  }

 private:
  struct Handle {
    int fd = -1;
    std::string rel_path;
    std::unique_ptr<ProtectedHandle> prot;  // null in loopback mode
    uint64_t seen_gen = 0;
    std::mutex mu;
  };

  // Adapter from the engine's file interface to a backing-store fd.
  class BackingFile : public RandomAccessFile {
   public:
    BackingFile(BackingStore* store, int fd) : store_(store), fd_(fd) {}
    bytes read_at(uint64_t offset, size_t n) const override {
      return store_->pread(fd_, offset, n);
    }
    void write_at(uint64_t offset, bytes_view data) override {
      store_->pwrite(fd_, offset, data);
    }
    uint64_t size() const override { return store_->file_size(fd_); }

   private:
    BackingStore* store_;
    int fd_;
  };

  std::string backing_path(const std::string& rel) const {
    return rel.empty() ? root_real_ : root_real_ + "/" + rel;
  }

  // Containment: after lexical normalisation, whatever part of the path
  // exists must resolve (through any symlinks) back under the root.
  // Links leading outside are treated as dangling.
  void check_containment(const std::string& full) const {
    std::string probe = full;
    while (true) {
      auto rp = store_->realpath(probe);
      if (rp) {
        if (!path_contains(root_real_, *rp))
          throw FsError(ENOENT, "outside root: " + full);
        return;
      }
      size_t slash = probe.find_last_of('/');
      if (slash == std::string::npos || probe.size() <= root_real_.size())
        return;
      probe = probe.substr(0, slash);
    }
  }

  std::string resolve(const std::string& path) const {
    std::string full = backing_path(normalize_rel_path(path));
    check_containment(full);
    return full;
  }

  // For operations on the name itself (lstat, readlink, unlink, rename...):
  // intermediate components are still contained, but a final symlink is not
  // followed, so an outside-pointing link stays visible as dangling.
  std::string resolve_nofollow(const std::string& path) const {
    std::string full = backing_path(normalize_rel_path(path));
    size_t slash = full.find_last_of('/');
    if (slash != std::string::npos && slash >= root_real_.size())
      check_containment(full.substr(0, slash));
    return full;
  }

  std::string resolve_for_create(const std::string& path) const {
    std::string rel = normalize_rel_path(path);
    std::string full = backing_path(rel);
    size_t slash = full.find_last_of('/');
    if (slash != std::string::npos && slash >= root_real_.size())
      check_containment(full.substr(0, slash));
    return full;
  }

  uint64_t open_common(const std::string& path, int flags, mode_t mode,
                       bool creating) {
    std::string full = creating ? resolve_for_create(path) : resolve(path);
    int fd = store_->open(full, flags, mode);
    auto h = std::make_shared<Handle>();
    h->fd = fd;
    h->rel_path = normalize_rel_path(path);
    if (cfg_.fs_type == FsType::Dlpfs) {
      GuardConfig g = cfg_.guard;
      g.format_mode = format_mode_for(h->rel_path);
      uint64_t seed = hash_combine(
          hash_combine(secret_, hash_bytes(h->rel_path, 0)),
          open_counter_.fetch_add(1, std::memory_order_relaxed));
      h->prot = std::make_unique<ProtectedHandle>(
          std::make_shared<BackingFile>(store_.get(), fd), policy_, g, seed);
      h->seen_gen = write_gen_.load(std::memory_order_relaxed);
    }
    std::lock_guard<std::mutex> lk(table_mu_);
    uint64_t id = next_handle_++;
    handles_[id] = std::move(h);
    return id;
  }

  FormatMode format_mode_for(const std::string& rel) const {
    if (!cfg_.auto_line_mode) return cfg_.guard.format_mode;
    size_t dot = rel.find_last_of('.');
    if (dot == std::string::npos) return cfg_.guard.format_mode;
    std::string ext = rel.substr(dot);
    if (ext == ".csv" || ext == ".tsv" || ext == ".log" || ext == ".jsonl")
      return FormatMode::LineAligned;
    return cfg_.guard.format_mode;
  }

  std::shared_ptr<Handle> get_handle(uint64_t id) {
    std::lock_guard<std::mutex> lk(table_mu_);
    auto it = handles_.find(id);
    if (it == handles_.end()) throw FsError(EBADF, "bad handle");
    return it->second;
  }

  // Any write through the mount invalidates every read cache.
  void refresh_cache_generation(Handle& h) {
    uint64_t gen = write_gen_.load(std::memory_order_relaxed);
    if (h.seen_gen != gen) {
      if (h.prot) h.prot->invalidate_cache();
      h.seen_gen = gen;
    }
  }

  MountConfig cfg_;
  std::shared_ptr<BackingStore> store_;
  std::string root_real_;
  std::shared_ptr<const CompiledPolicy> policy_;
  uint64_t secret_ = 0;

  std::mutex table_mu_;
  std::mutex dir_mu_;
  std::map<uint64_t, std::shared_ptr<Handle>> handles_;
  uint64_t next_handle_ = 1;
  std::atomic<uint64_t> open_counter_{0};
  std::atomic<uint64_t> write_gen_{1};
};

}  // namespace dlpfs
