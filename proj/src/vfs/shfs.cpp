#include <algorithm>
#include <bit>
#include <cstring>
#include <unordered_set>

#include "uk/error.hpp"
#include "uk/vfs.hpp"

namespace uk::vfs {

namespace {

constexpr char kMagic[5] = {'S', 'H', 'F', 'S', '1'};
constexpr std::uint32_t kMaxBuckets = 1u << 26;

template <class T>
void put_le(std::vector<std::byte>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::byte>(static_cast<std::uint64_t>(v) >> (8 * i)));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> in) : in_(in) {}

  template <class T>
  T le() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::span<const std::byte> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::span<const std::byte> rest() const { return in_.subspan(pos_); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) raise(Errc::corrupt_image, "truncated image");
  }

  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

}  // namespace

ShfsImage ShfsImage::build(const std::vector<Input>& inputs) {
  ShfsImage img;
  std::unordered_set<std::string_view> seen;
  std::size_t total = 0;
  for (const auto& [name, bytes] : inputs) {
    if (!seen.insert(name).second) raise(Errc::duplicate_name, name);
    if (name.size() > UINT16_MAX) raise(Errc::invalid_argument, "name longer than 65535 bytes");
    total += bytes.size();
  }
  img.blob_.reserve(total);
  img.entries_.reserve(inputs.size());
  for (const auto& [name, bytes] : inputs) {
    img.entries_.push_back({fnv1a64(name), name, img.blob_.size(), bytes.size()});
    img.blob_.insert(img.blob_.end(), bytes.begin(), bytes.end());
  }
  img.heads_.assign(std::bit_ceil(2 * inputs.size()), -1);
  img.index();
  return img;
}

void ShfsImage::index() {
  const std::size_t mask = heads_.size() - 1;
  std::fill(heads_.begin(), heads_.end(), -1);
  next_.assign(entries_.size(), -1);
  std::vector<std::int32_t> tail(heads_.size(), -1);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const std::size_t b = entries_[i].name_hash & mask;
    const auto idx = static_cast<std::int32_t>(i);
    if (tail[b] < 0) {
      heads_[b] = idx;
    } else {
      next_[tail[b]] = idx;
    }
    tail[b] = idx;
  }
}

std::vector<std::byte> ShfsImage::serialize() const {
  std::vector<std::byte> out;
  std::size_t names = 0;
  for (const auto& e : entries_) names += e.name.size();
  out.reserve(13 + entries_.size() * 26 + names + blob_.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint32_t>(out, bucket_count());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    put_le<std::uint64_t>(out, e.name_hash);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    for (char c : e.name) out.push_back(static_cast<std::byte>(c));
    put_le<std::uint64_t>(out, e.offset);
    put_le<std::uint64_t>(out, e.length);
  }
  out.insert(out.end(), blob_.begin(), blob_.end());
  return out;
}

ShfsImage ShfsImage::deserialize(std::span<const std::byte> bytes) {
  Reader r(bytes);
  const auto magic = r.take(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
    raise(Errc::corrupt_image, "bad magic");
  }
  const auto buckets = r.le<std::uint32_t>();
  const auto count = r.le<std::uint32_t>();
  if (buckets == 0 || !std::has_single_bit(buckets) || buckets > kMaxBuckets) {
    raise(Errc::corrupt_image, "bucket count is not a usable power of two");
  }
  // Every entry takes at least 26 bytes; reject counts the input cannot hold.
  if (count > r.rest().size() / 26) raise(Errc::corrupt_image, "entry count exceeds image");

  ShfsImage img;
  img.entries_.reserve(count);
  std::unordered_set<std::string_view> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    ShfsEntry e;
    e.name_hash = r.le<std::uint64_t>();
    const auto len = r.le<std::uint16_t>();
    const auto name = r.take(len);
    e.name.assign(reinterpret_cast<const char*>(name.data()), name.size());
    e.offset = r.le<std::uint64_t>();
    e.length = r.le<std::uint64_t>();
    if (e.name_hash != fnv1a64(e.name)) raise(Errc::corrupt_image, "hash mismatch for " + e.name);
    img.entries_.push_back(std::move(e));
  }
  for (const auto& e : img.entries_) {
    if (!seen.insert(e.name).second) raise(Errc::corrupt_image, "duplicate entry " + e.name);
  }
  const auto blob = r.rest();
  img.blob_.assign(blob.begin(), blob.end());

  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  spans.reserve(count);
  for (const auto& e : img.entries_) {
    if (e.offset > img.blob_.size() || e.length > img.blob_.size() - e.offset) {
      raise(Errc::corrupt_image, "entry " + e.name + " runs past the blob");
    }
    if (e.length > 0) spans.emplace_back(e.offset, e.offset + e.length);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) raise(Errc::corrupt_image, "overlapping entries");
  }
  img.heads_.assign(buckets, -1);
  img.index();
  return img;
}

std::span<const std::byte> ShfsImage::contents(const ShfsEntry& e) const noexcept {
  return std::span<const std::byte>(blob_).subspan(e.offset, e.length);
}

const ShfsEntry* ShfsImage::find(std::string_view name, std::size_t* probes) const noexcept {
  std::size_t n = 0;
  const std::uint64_t h = fnv1a64(name);
  const ShfsEntry* hit = nullptr;
  for (std::int32_t i = heads_[h & (heads_.size() - 1)]; i >= 0; i = next_[i]) {
    ++n;
    const ShfsEntry& e = entries_[i];
    if (e.name_hash == h && e.name == name) {
      hit = &e;
      break;
    }
  }
  if (probes != nullptr) *probes = n;
  return hit;
}

std::size_t ShfsImage::chain_length(std::uint32_t bucket) const noexcept {
  std::size_t n = 0;
  for (std::int32_t i = heads_[bucket]; i >= 0; i = next_[i]) ++n;
  return n;
}

std::size_t ShfsHandle::read(std::span<std::byte> out) noexcept {
  if (cursor >= data.size()) return 0;
  const std::size_t n = std::min<std::uint64_t>(out.size(), data.size() - cursor);
  std::memcpy(out.data(), data.data() + cursor, n);
  cursor += n;
  return n;
}

ShfsHandle shfs_open(const ShfsImage& img, std::string_view name) {
  const ShfsEntry* e = img.find(name);
  if (e == nullptr) raise(Errc::not_found, std::string(name));
  return {e, img.contents(*e), 0};
}

class ShfsFs::File final : public VNode {
 public:
  File(const ShfsEntry& e, std::span<const std::byte> data) : entry_(&e), data_(data) {}

  NodeKind kind() const noexcept override { return NodeKind::file; }
  std::string_view name() const noexcept override { return entry_->name; }
  std::uint64_t size() const noexcept override { return data_.size(); }
  VNode* lookup(std::string_view) override { raise(Errc::not_directory, entry_->name); }

  std::size_t read(std::uint64_t offset, std::span<std::byte> out) override {
    if (offset >= data_.size()) return 0;
    const std::size_t n = std::min<std::uint64_t>(out.size(), data_.size() - offset);
    std::memcpy(out.data(), data_.data() + offset, n);
    return n;
  }

 private:
  const ShfsEntry* entry_;
  std::span<const std::byte> data_;
};

class ShfsFs::Root final : public VNode {
 public:
  explicit Root(const ShfsImage& img) : img_(img) {
    files_.reserve(img.entries().size());
    for (const auto& e : img.entries()) files_.emplace_back(e, img.contents(e));
  }

  NodeKind kind() const noexcept override { return NodeKind::directory; }
  std::string_view name() const noexcept override { return ""; }
  std::uint64_t size() const noexcept override { return files_.size(); }

  VNode* lookup(std::string_view name) override {
    const ShfsEntry* e = img_.find(name);
    return e == nullptr ? nullptr : &files_[static_cast<std::size_t>(e - img_.entries().data())];
  }

  std::size_t read(std::uint64_t, std::span<std::byte>) override {
    raise(Errc::is_directory, "/");
  }

 private:
  const ShfsImage& img_;
  std::vector<File> files_;
};

ShfsFs::ShfsFs(std::shared_ptr<const ShfsImage> img)
    : img_(std::move(img)), root_(std::make_unique<Root>(*img_)) {}

ShfsFs::~ShfsFs() = default;

VNode& ShfsFs::root() { return *root_; }

}  // namespace uk::vfs
