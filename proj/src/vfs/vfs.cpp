#include <algorithm>
#include <cerrno>
#include <cstring>
#include <new>

#include "uk/error.hpp"
#include "uk/vfs.hpp"

namespace uk::vfs {

VNode* VNode::create(std::string_view, NodeKind) {
  raise(Errc::read_only_fs, "filesystem does not support creation");
}

std::size_t VNode::write(std::uint64_t, std::span<const std::byte>) {
  raise(Errc::read_only_fs, "filesystem is read-only");
}

void VNode::truncate(std::uint64_t) { raise(Errc::read_only_fs, "filesystem is read-only"); }

namespace {

class RamNode final : public VNode {
 public:
  RamNode(NodeKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  NodeKind kind() const noexcept override { return kind_; }
  std::string_view name() const noexcept override { return name_; }
  std::uint64_t size() const noexcept override {
    return kind_ == NodeKind::file ? data_.size() : children_.size();
  }

  VNode* lookup(std::string_view name) override {
    auto it = children_.find(name);
    return it == children_.end() ? nullptr : it->second.get();
  }

  VNode* create(std::string_view name, NodeKind kind) override {
    if (kind_ != NodeKind::directory) raise(Errc::not_directory, std::string(name_));
    auto [it, inserted] = children_.try_emplace(std::string(name), nullptr);
    if (!inserted) raise(Errc::already_exists, std::string(name));
    it->second = std::make_unique<RamNode>(kind, std::string(name));
    return it->second.get();
  }

  std::size_t read(std::uint64_t offset, std::span<std::byte> out) override {
    if (kind_ != NodeKind::file) raise(Errc::is_directory, name_);
    if (offset >= data_.size()) return 0;
    const std::size_t n = std::min<std::uint64_t>(out.size(), data_.size() - offset);
    std::memcpy(out.data(), data_.data() + offset, n);
    return n;
  }

  std::size_t write(std::uint64_t offset, std::span<const std::byte> in) override {
    if (kind_ != NodeKind::file) raise(Errc::is_directory, name_);
    if (offset + in.size() > data_.size()) data_.resize(offset + in.size());
    std::memcpy(data_.data() + offset, in.data(), in.size());
    return in.size();
  }

  void truncate(std::uint64_t size) override {
    if (kind_ != NodeKind::file) raise(Errc::is_directory, name_);
    data_.resize(size);
  }

 private:
  NodeKind kind_;
  std::string name_;
  std::vector<std::byte> data_;
  std::map<std::string, std::unique_ptr<RamNode>, std::less<>> children_;
};

bool has_write_intent(unsigned flags) {
  using namespace open_flags;
  return (flags & (write | create | truncate | append)) != 0;
}

void check_absolute(std::string_view path) {
  if (path.empty() || path.front() != '/') raise(Errc::invalid_argument, "path must be absolute");
}

template <class Fn>
auto errno_of(Fn&& fn) noexcept -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    return -to_errno(e.code());
  } catch (const std::bad_alloc&) {
    return -ENOMEM;
  } catch (...) {
    return -EIO;
  }
}

}  // namespace

RamFs::RamFs() : root_(std::make_unique<RamNode>(NodeKind::directory, "")) {}
RamFs::~RamFs() = default;
VNode& RamFs::root() { return *root_; }

Vfs::Vfs() = default;
Vfs::~Vfs() = default;

void Vfs::mount(std::shared_ptr<FileSystem> fs, std::string_view path) {
  check_absolute(path);
  std::string p(path);
  while (p.size() > 1 && p.back() == '/') p.pop_back();
  for (const Mount& m : mounts_) {
    if (m.path == p) raise(Errc::already_exists, "mount point " + p + " is taken");
  }
  mounts_.push_back({std::move(p), std::move(fs)});
  std::stable_sort(mounts_.begin(), mounts_.end(),
                   [](const Mount& a, const Mount& b) { return a.path.size() > b.path.size(); });
}

std::pair<Vfs::Mount*, std::string_view> Vfs::find_mount(std::string_view path, Errc& err) noexcept {
  if (path.empty() || path.front() != '/') {
    err = Errc::invalid_argument;
    return {nullptr, {}};
  }
  for (Mount& m : mounts_) {
    if (m.path == "/") return {&m, path};
    if (path.substr(0, m.path.size()) == m.path &&
        (path.size() == m.path.size() || path[m.path.size()] == '/')) {
      return {&m, path.substr(m.path.size())};
    }
  }
  err = Errc::not_found;
  return {nullptr, {}};
}

// Misses come back as an error code rather than an exception so that
// try_open() pays the same for a miss as for a hit.
VNode* Vfs::walk(VNode& from, std::string_view rest, bool parent_only, std::string_view* leaf,
                 Errc& err) {
  VNode* node = &from;
  std::size_t pos = 0;
  for (;;) {
    while (pos < rest.size() && rest[pos] == '/') ++pos;
    if (pos >= rest.size()) break;
    std::size_t end = rest.find('/', pos);
    if (end == std::string_view::npos) end = rest.size();
    const std::string_view comp = rest.substr(pos, end - pos);
    if (comp == "." || comp == "..") {
      err = Errc::invalid_argument;
      return nullptr;
    }
    std::size_t after = end;
    while (after < rest.size() && rest[after] == '/') ++after;
    const bool last = after >= rest.size();
    if (node->kind() != NodeKind::directory) {
      err = Errc::not_directory;
      return nullptr;
    }
    if (last && parent_only) {
      *leaf = comp;
      return node;
    }
    VNode* next = node->lookup(comp);
    if (next == nullptr) {
      err = Errc::not_found;
      return nullptr;
    }
    node = next;
    pos = end;
  }
  if (parent_only) {
    err = Errc::invalid_argument;
    return nullptr;
  }
  return node;
}

VNode* Vfs::resolve(std::string_view path, bool parent_only, std::string_view* leaf, Mount** mount) {
  Errc err{};
  auto [m, rest] = find_mount(path, err);
  VNode* node = m == nullptr ? nullptr : walk(m->fs->root(), rest, parent_only, leaf, err);
  if (node == nullptr) raise(err, std::string(path));
  if (mount != nullptr) *mount = m;
  return node;
}

int Vfs::open(std::string_view path, unsigned flags) {
  Errc err{};
  const int fd = open_core(path, flags, err);
  if (fd < 0) raise(err, std::string(path));
  return fd;
}

int Vfs::open_core(std::string_view path, unsigned flags, Errc& err) {
  namespace of = open_flags;
  if ((flags & (of::read | of::write)) == 0) flags |= of::read;
  auto [m, rest] = find_mount(path, err);
  if (m == nullptr) return -1;
  if (has_write_intent(flags) && m->fs->read_only()) {
    err = Errc::read_only_fs;
    return -1;
  }
  VNode* node = walk(m->fs->root(), rest, false, nullptr, err);
  if (node == nullptr) {
    if (err != Errc::not_found || !(flags & of::create)) return -1;
    std::string_view leaf;
    VNode* parent = walk(m->fs->root(), rest, true, &leaf, err);
    if (parent == nullptr) return -1;
    node = parent->create(leaf, NodeKind::file);
  }
  if (node->kind() == NodeKind::directory) {
    err = Errc::is_directory;
    return -1;
  }
  if ((flags & of::truncate) && (flags & of::write)) node->truncate(0);

  // The open file description lives apart from the fd slot, as in POSIX.
  auto h = std::make_unique<FileHandle>(FileHandle{node, 0, flags});
  for (std::size_t i = 0; i < fds_.size(); ++i) {
    if (!fds_[i]) {
      fds_[i] = std::move(h);
      return static_cast<int>(i) + kFirstFd;
    }
  }
  fds_.push_back(std::move(h));
  return static_cast<int>(fds_.size() - 1) + kFirstFd;
}

FileHandle& Vfs::handle_of(int fd) {
  const long i = static_cast<long>(fd) - kFirstFd;
  if (i < 0 || static_cast<std::size_t>(i) >= fds_.size() || !fds_[i]) {
    raise(Errc::bad_handle, "fd " + std::to_string(fd) + " is not open");
  }
  return *fds_[i];
}

const FileHandle& Vfs::handle(int fd) const { return const_cast<Vfs*>(this)->handle_of(fd); }

std::size_t Vfs::read(int fd, std::span<std::byte> out) {
  FileHandle& h = handle_of(fd);
  if (!(h.flags & open_flags::read)) raise(Errc::bad_handle, "fd not open for reading");
  const std::size_t n = h.node->read(h.cursor, out);
  h.cursor += n;
  return n;
}

std::vector<std::byte> Vfs::read(int fd, std::size_t n) {
  std::vector<std::byte> out(n);
  out.resize(read(fd, std::span<std::byte>(out)));
  return out;
}

std::size_t Vfs::write(int fd, std::span<const std::byte> in) {
  FileHandle& h = handle_of(fd);
  if (!(h.flags & open_flags::write)) raise(Errc::bad_handle, "fd not open for writing");
  if (h.flags & open_flags::append) h.cursor = h.node->size();
  const std::size_t n = h.node->write(h.cursor, in);
  h.cursor += n;
  return n;
}

std::size_t Vfs::write(int fd, std::string_view text) {
  return write(fd, std::as_bytes(std::span<const char>(text.data(), text.size())));
}

void Vfs::close(int fd) {
  handle_of(fd);
  fds_[fd - kFirstFd].reset();
  while (!fds_.empty() && !fds_.back()) fds_.pop_back();
}

StatInfo Vfs::stat(std::string_view path) {
  VNode* node = resolve(path, false, nullptr, nullptr);
  return {node->kind(), node->size()};
}

void Vfs::mkdir(std::string_view path) {
  Mount* m = nullptr;
  std::string_view leaf;
  VNode* parent = resolve(path, true, &leaf, &m);
  if (m->fs->read_only()) raise(Errc::read_only_fs, std::string(path));
  parent->create(leaf, NodeKind::directory);
}

std::size_t Vfs::open_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(fds_.begin(), fds_.end(), [](auto& h) { return h != nullptr; }));
}

int Vfs::try_open(std::string_view path, unsigned flags) noexcept {
  return errno_of([&] {
    Errc err{};
    const int fd = open_core(path, flags, err);
    return fd < 0 ? -to_errno(err) : fd;
  });
}

std::int64_t Vfs::try_read(int fd, std::span<std::byte> out) noexcept {
  return errno_of([&] { return static_cast<std::int64_t>(read(fd, out)); });
}

std::int64_t Vfs::try_write(int fd, std::span<const std::byte> in) noexcept {
  return errno_of([&] { return static_cast<std::int64_t>(write(fd, in)); });
}

int Vfs::try_close(int fd) noexcept {
  return errno_of([&] {
    close(fd);
    return 0;
  });
}

int Vfs::try_stat(std::string_view path, StatInfo& out) noexcept {
  return errno_of([&] {
    out = stat(path);
    return 0;
  });
}

}  // namespace uk::vfs
