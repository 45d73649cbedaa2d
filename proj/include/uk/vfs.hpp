#pragma once

// vfscore: mount table, path walk and file-descriptor table over pluggable
// filesystems. Paths are absolute, '/'-separated, without "." or "..".

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uk/error.hpp"
#include "uk/hash.hpp"

namespace uk::vfs {

enum class NodeKind : std::uint8_t { file, directory };

struct StatInfo {
  NodeKind kind = NodeKind::file;
  std::uint64_t size = 0;
  bool operator==(const StatInfo&) const = default;
};

namespace open_flags {
inline constexpr unsigned read = 0x1;
inline constexpr unsigned write = 0x2;
inline constexpr unsigned create = 0x4;
inline constexpr unsigned truncate = 0x8;
inline constexpr unsigned append = 0x10;
}  // namespace open_flags

class VNode {
 public:
  virtual ~VNode() = default;

  virtual NodeKind kind() const noexcept = 0;
  virtual std::string_view name() const noexcept = 0;
  virtual std::uint64_t size() const noexcept = 0;

  // Directories only; null when absent.
  virtual VNode* lookup(std::string_view name) = 0;
  virtual VNode* create(std::string_view name, NodeKind kind);

  // Files only.
  virtual std::size_t read(std::uint64_t offset, std::span<std::byte> out) = 0;
  virtual std::size_t write(std::uint64_t offset, std::span<const std::byte> in);
  virtual void truncate(std::uint64_t size);
};

class FileSystem {
 public:
  virtual ~FileSystem() = default;
  virtual VNode& root() = 0;
  virtual bool read_only() const noexcept = 0;
  virtual std::string_view type() const noexcept = 0;
};

// In-memory tree of files and directories.
class RamFs final : public FileSystem {
 public:
  RamFs();
  ~RamFs() override;
  VNode& root() override;
  bool read_only() const noexcept override { return false; }
  std::string_view type() const noexcept override { return "ramfs"; }

 private:
  std::unique_ptr<VNode> root_;
};

struct FileHandle {
  VNode* node = nullptr;
  std::uint64_t cursor = 0;
  unsigned flags = 0;
};

class Vfs {
 public:
  Vfs();
  ~Vfs();

  // Throws already_exists for a taken mount point.
  void mount(std::shared_ptr<FileSystem> fs, std::string_view path);

  int open(std::string_view path, unsigned flags);
  std::size_t read(int fd, std::span<std::byte> out);
  std::vector<std::byte> read(int fd, std::size_t n);
  std::size_t write(int fd, std::span<const std::byte> in);
  std::size_t write(int fd, std::string_view text);
  void close(int fd);
  StatInfo stat(std::string_view path);
  void mkdir(std::string_view path);

  // Syscall-convention twins: a result >= 0 or a negative errno.
  int try_open(std::string_view path, unsigned flags) noexcept;
  std::int64_t try_read(int fd, std::span<std::byte> out) noexcept;
  std::int64_t try_write(int fd, std::span<const std::byte> in) noexcept;
  int try_close(int fd) noexcept;
  int try_stat(std::string_view path, StatInfo& out) noexcept;

  const FileHandle& handle(int fd) const;
  std::size_t open_count() const noexcept;

  static constexpr int kFirstFd = 3;

 private:
  struct Mount {
    std::string path;
    std::shared_ptr<FileSystem> fs;
  };

  // Splits off the mount; the rest is resolved relative to its root.
  std::pair<Mount*, std::string_view> find_mount(std::string_view path, Errc& err) noexcept;
  VNode* walk(VNode& from, std::string_view rest, bool parent_only, std::string_view* leaf,
              Errc& err);
  // Throwing wrapper over find_mount + walk.
  VNode* resolve(std::string_view path, bool parent_only, std::string_view* leaf, Mount** mount);
  // -1 with `err` set on failure.
  int open_core(std::string_view path, unsigned flags, Errc& err);
  FileHandle& handle_of(int fd);

  std::vector<Mount> mounts_;  // longest path first
  std::vector<std::unique_ptr<FileHandle>> fds_;
};

using uk::fnv1a64;

struct ShfsEntry {
  std::uint64_t name_hash = 0;
  std::string name;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  bool operator==(const ShfsEntry&) const = default;
};

// Read-only flat image: hashed entry table over one contiguous blob.
//
// Wire format, little-endian: "SHFS1", u32 bucket_count, u32 entry_count,
// entries {u64 name_hash, u16 name_len, name, u64 offset, u64 length}, blob.
class ShfsImage {
 public:
  using Input = std::pair<std::string, std::vector<std::byte>>;

  ShfsImage() = default;

  // Throws duplicate_name. Blob offsets follow input order.
  static ShfsImage build(const std::vector<Input>& inputs);
  // Throws corrupt_image.
  static ShfsImage deserialize(std::span<const std::byte> bytes);
  std::vector<std::byte> serialize() const;

  std::uint32_t bucket_count() const noexcept { return static_cast<std::uint32_t>(heads_.size()); }
  const std::vector<ShfsEntry>& entries() const noexcept { return entries_; }
  std::span<const std::byte> blob() const noexcept { return blob_; }
  std::span<const std::byte> contents(const ShfsEntry& e) const noexcept;

  // One hash, one bucket chain, name compares. `probes` receives the number
  // of chain entries inspected.
  const ShfsEntry* find(std::string_view name, std::size_t* probes = nullptr) const noexcept;
  std::size_t chain_length(std::uint32_t bucket) const noexcept;

 private:
  void index();

  std::vector<ShfsEntry> entries_;
  std::vector<std::byte> blob_;
  std::vector<std::int32_t> heads_;
  std::vector<std::int32_t> next_;
};

// Direct handle that skips path resolution and VFS dispatch.
struct ShfsHandle {
  const ShfsEntry* entry = nullptr;
  std::span<const std::byte> data;
  std::uint64_t cursor = 0;

  std::uint64_t length() const noexcept { return data.size(); }
  std::size_t read(std::span<std::byte> out) noexcept;
};

// Throws not_found.
ShfsHandle shfs_open(const ShfsImage& img, std::string_view name);

// Presents an image as a read-only root directory to the VFS.
class ShfsFs final : public FileSystem {
 public:
  explicit ShfsFs(std::shared_ptr<const ShfsImage> img);
  ~ShfsFs() override;
  VNode& root() override;
  bool read_only() const noexcept override { return true; }
  std::string_view type() const noexcept override { return "shfs"; }
  const ShfsImage& image() const noexcept { return *img_; }

 private:
  class Root;
  class File;
  std::shared_ptr<const ShfsImage> img_;
  std::unique_ptr<Root> root_;
};

}  // namespace uk::vfs
