#pragma once

// Binding to the kernel's user-space filesystem facility. Deliberately thin:
// every callback forwards to exactly one Vfs operation and translates
// FsError into -errno. No protection logic lives here, so environments
// without FUSE (or without privileges) still exercise all engine and vfs
// behaviour through the library API; mount() then reports MountUnavailable.

#include <string>

#include "dlpfs/common.hpp"
#include "dlpfs/vfs.hpp"

namespace dlpfs {

struct AdapterOptions {
  bool foreground = true;
  bool allow_other = false;
  bool single_threaded = false;  // debug aid
};

class MountUnavailableError : public std::runtime_error {
 public:
  MountUnavailableError()
      : std::runtime_error(
            "user-space filesystem facility (FUSE) is not available on this "
            "host; the library API remains fully functional") {}
};

class MountBusyError : public std::runtime_error {
 public:
  explicit MountBusyError(const std::string& mp)
      : std::runtime_error("mountpoint busy or not empty: " + mp) {}
};

// Checks the MountConfig invariants that only matter for a real mount.
inline void validate_mountpoint(const MountConfig& cfg) {
  struct ::stat st;
  if (::lstat(cfg.mountpoint.c_str(), &st) != 0)
    throw FsError(errno, "mountpoint " + cfg.mountpoint);
  if (!S_ISDIR(st.st_mode)) throw FsError(ENOTDIR, cfg.mountpoint);
  char* root_rp = ::realpath(cfg.root.c_str(), nullptr);
  char* mp_rp = ::realpath(cfg.mountpoint.c_str(), nullptr);
  std::string root_s = root_rp ? root_rp : cfg.root;
  std::string mp_s = mp_rp ? mp_rp : cfg.mountpoint;
  ::free(root_rp);
  ::free(mp_rp);
  if (path_contains(root_s, mp_s) || path_contains(mp_s, root_s))
    throw FsError(EINVAL, "root and mountpoint must be disjoint");
}

}  // namespace dlpfs

#if DLPFS_HAVE_FUSE

#define FUSE_USE_VERSION 31
#include <fuse3/fuse.h>

#include <cstring>
#include <vector>

namespace dlpfs {

namespace fuse_detail {

inline Vfs* vfs() { return static_cast<Vfs*>(fuse_get_context()->private_data); }

template <typename F>
int guard(F&& f) {
  try {
    return f();
  } catch (const FsError& e) {
    return -e.code();
  } catch (const std::exception&) {
    return -EIO;
  }
}

inline int op_getattr(const char* path, struct stat* st, fuse_file_info*) {
  return guard([&] {
    *st = vfs()->getattr(path);
    return 0;
  });
}

inline int op_readdir(const char* path, void* buf, fuse_fill_dir_t filler,
                      off_t, fuse_file_info*, fuse_readdir_flags) {
  return guard([&] {
    filler(buf, ".", nullptr, 0, static_cast<fuse_fill_dir_flags>(0));
    filler(buf, "..", nullptr, 0, static_cast<fuse_fill_dir_flags>(0));
    for (const auto& name : vfs()->readdir(path))
      filler(buf, name.c_str(), nullptr, 0, static_cast<fuse_fill_dir_flags>(0));
    return 0;
  });
}

inline int op_open(const char* path, fuse_file_info* fi) {
  return guard([&] {
    fi->fh = vfs()->open(path, fi->flags);
    // Page-cache access would bypass the stream engine; force direct I/O
    // for protected mounts (this also declines mmap-style access).
    if (vfs()->config().fs_type == FsType::Dlpfs) fi->direct_io = 1;
    return 0;
  });
}

inline int op_create(const char* path, mode_t mode, fuse_file_info* fi) {
  return guard([&] {
    fi->fh = vfs()->create(path, fi->flags, mode);
    if (vfs()->config().fs_type == FsType::Dlpfs) fi->direct_io = 1;
    return 0;
  });
}

inline int op_read(const char* path, char* buf, size_t n, off_t off,
                   fuse_file_info* fi) {
  (void)path;
  return guard([&]() -> int {
    bytes data = vfs()->read(fi->fh, static_cast<uint64_t>(off), n);
    std::memcpy(buf, data.data(), data.size());
    return static_cast<int>(data.size());
  });
}

inline int op_write(const char* path, const char* buf, size_t n, off_t off,
                    fuse_file_info* fi) {
  (void)path;
  return guard([&]() -> int {
    return static_cast<int>(
        vfs()->write(fi->fh, static_cast<uint64_t>(off), bytes_view(buf, n)));
  });
}

inline int op_flush(const char* path, fuse_file_info* fi) {
  (void)path;
  return guard([&] {
    vfs()->flush(fi->fh);
    return 0;
  });
}

inline int op_release(const char* path, fuse_file_info* fi) {
  (void)path;
  return guard([&] {
    vfs()->release(fi->fh);
    return 0;
  });
}

inline int op_fsync(const char* path, int, fuse_file_info* fi) {
  (void)path;
  return guard([&] {
    vfs()->fsync(fi->fh);
    return 0;
  });
}

inline int op_unlink(const char* path) {
  return guard([&] { vfs()->unlink(path); return 0; });
}

inline int op_truncate(const char* path, off_t len, fuse_file_info*) {
  return guard([&] {
    vfs()->truncate(path, static_cast<uint64_t>(len));
    return 0;
  });
}

inline int op_rename(const char* from, const char* to, unsigned int flags) {
  if (flags) return -EINVAL;
  return guard([&] { vfs()->rename(from, to); return 0; });
}

inline int op_mkdir(const char* path, mode_t mode) {
  return guard([&] { vfs()->mkdir(path, mode); return 0; });
}

inline int op_rmdir(const char* path) {
  return guard([&] { vfs()->rmdir(path); return 0; });
}

inline int op_readlink(const char* path, char* buf, size_t n) {
  return guard([&] {
    bytes target = vfs()->readlink(path);
    size_t len = std::min(target.size(), n - 1);
    std::memcpy(buf, target.data(), len);
    buf[len] = '\0';
    return 0;
  });
}

inline int op_chmod(const char* path, mode_t mode, fuse_file_info*) {
  return guard([&] { vfs()->chmod(path, mode); return 0; });
}

inline int op_chown(const char* path, uid_t uid, gid_t gid, fuse_file_info*) {
  return guard([&] { vfs()->chown(path, uid, gid); return 0; });
}

inline int op_utimens(const char* path, const struct timespec tv[2],
                      fuse_file_info*) {
  return guard([&] { vfs()->utimens(path, tv); return 0; });
}

inline int op_statfs(const char* path, struct statvfs* st) {
  return guard([&] { vfs()->statfs(path, st); return 0; });
}

inline int op_getxattr(const char* path, const char* name, char* value,
                       size_t size) {
  return guard([&]() -> int {
    bytes v = vfs()->getxattr(path, name);
    if (size == 0) return static_cast<int>(v.size());
    if (v.size() > size) return -ERANGE;
    std::memcpy(value, v.data(), v.size());
    return static_cast<int>(v.size());
  });
}

inline int op_setxattr(const char* path, const char* name, const char* value,
                       size_t size, int flags) {
  return guard([&] {
    vfs()->setxattr(path, name, bytes_view(value, size), flags);
    return 0;
  });
}

inline int op_listxattr(const char* path, char* list, size_t size) {
  return guard([&]() -> int {
    auto names = vfs()->listxattr(path);
    size_t need = 0;
    for (const auto& n : names) need += n.size() + 1;
    if (size == 0) return static_cast<int>(need);
    if (need > size) return -ERANGE;
    char* p = list;
    for (const auto& n : names) {
      std::memcpy(p, n.c_str(), n.size() + 1);
      p += n.size() + 1;
    }
    return static_cast<int>(need);
  });
}

inline int op_removexattr(const char* path, const char* name) {
  return guard([&] { vfs()->removexattr(path, name); return 0; });
}

}  // namespace fuse_detail

// Serves the vfs at cfg.mountpoint until unmounted. Blocking.
inline int mount(const MountConfig& cfg, const AdapterOptions& opts) {
  validate_mountpoint(cfg);
  Vfs vfs(cfg);

  fuse_operations ops{};
  ops.getattr = fuse_detail::op_getattr;
  ops.readdir = fuse_detail::op_readdir;
  ops.open = fuse_detail::op_open;
  ops.create = fuse_detail::op_create;
  ops.read = fuse_detail::op_read;
  ops.write = fuse_detail::op_write;
  ops.flush = fuse_detail::op_flush;
  ops.release = fuse_detail::op_release;
  ops.fsync = fuse_detail::op_fsync;
  ops.unlink = fuse_detail::op_unlink;
  ops.truncate = fuse_detail::op_truncate;
  ops.rename = fuse_detail::op_rename;
  ops.mkdir = fuse_detail::op_mkdir;
  ops.rmdir = fuse_detail::op_rmdir;
  ops.readlink = fuse_detail::op_readlink;
  ops.chmod = fuse_detail::op_chmod;
  ops.chown = fuse_detail::op_chown;
  ops.utimens = fuse_detail::op_utimens;
  ops.statfs = fuse_detail::op_statfs;
  ops.getxattr = fuse_detail::op_getxattr;
  ops.setxattr = fuse_detail::op_setxattr;
  ops.listxattr = fuse_detail::op_listxattr;
  ops.removexattr = fuse_detail::op_removexattr;

  std::vector<std::string> args = {"dlpfs"};
  if (opts.foreground) args.push_back("-f");
  if (opts.single_threaded) args.push_back("-s");
  if (opts.allow_other) {
    args.push_back("-o");
    args.push_back("allow_other");
  }
  args.push_back(cfg.mountpoint);
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());

  return fuse_main(static_cast<int>(argv.size()), argv.data(), &ops, &vfs);
}

}  // namespace dlpfs

#else  // !DLPFS_HAVE_FUSE

namespace dlpfs {

inline int mount(const MountConfig& cfg, const AdapterOptions&) {
  validate_mountpoint(cfg);
  throw MountUnavailableError();
}

}  // namespace dlpfs

#endif
