#include <doctest.h>

#include <bit>
#include <cstring>
#include <random>

#include "support/corpus.hpp"
#include "uk/error.hpp"
#include "uk/vfs.hpp"

using namespace uk;
using namespace uk::vfs;
namespace of = uk::vfs::open_flags;

namespace {

template <class Fn>
Errc error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected uk::Error");
  return Errc::invalid_argument;
}

std::string text(const std::vector<std::byte>& b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::vector<std::byte> bytes(std::string_view s) {
  const auto* p = reinterpret_cast<const std::byte*>(s.data());
  return {p, p + s.size()};
}

// Writes the documented image layout by hand.
std::vector<std::byte> reference_encode(std::uint32_t buckets, const test::Corpus& c) {
  std::vector<std::byte> out;
  auto le = [&](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
  };
  for (char ch : std::string_view("SHFS1")) out.push_back(static_cast<std::byte>(ch));
  le(buckets, 4);
  le(c.size(), 4);
  std::uint64_t off = 0;
  for (const auto& [name, data] : c) {
    // FNV-1a 64 from its published constants.
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : name) h = (h ^ ch) * 1099511628211ull;
    le(h, 8);
    le(name.size(), 2);
    for (char ch : name) out.push_back(static_cast<std::byte>(ch));
    le(off, 8);
    le(data.size(), 8);
    off += data.size();
  }
  for (const auto& [name, data] : c) out.insert(out.end(), data.begin(), data.end());
  return out;
}

}  // namespace

TEST_CASE("ramfs read-after-write, missing files, stat") {
  Vfs v;
  v.mount(std::make_shared<RamFs>(), "/");
  int fd = v.open("/a", of::write | of::create);
  CHECK(fd >= Vfs::kFirstFd);
  CHECK(v.write(fd, "hello") == 5);
  v.close(fd);
  fd = v.open("/a", of::read);
  CHECK(text(v.read(fd, 5)) == "hello");
  CHECK(v.read(fd, 5).empty());
  v.close(fd);

  CHECK(error_of([&] { v.open("/missing", of::read); }) == Errc::not_found);
  CHECK(v.stat("/a") == StatInfo{NodeKind::file, 5});
  CHECK(v.stat("/").kind == NodeKind::directory);
  CHECK(error_of([&] { v.read(fd, 1); }) == Errc::bad_handle);
  CHECK(error_of([&] { v.open("relative", of::read); }) == Errc::invalid_argument);
  CHECK(error_of([&] { v.open("/a/../a", of::read); }) == Errc::invalid_argument);
}

TEST_CASE("read returns min(n, size - cursor) and advances") {
  Vfs v;
  v.mount(std::make_shared<RamFs>(), "/");
  int fd = v.open("/f", of::read | of::write | of::create);
  v.write(fd, "0123456789");
  v.close(fd);
  fd = v.open("/f", of::read);
  CHECK(text(v.read(fd, 3)) == "012");
  CHECK(v.handle(fd).cursor == 3);
  CHECK(text(v.read(fd, 100)) == "3456789");
  CHECK(v.handle(fd).cursor == 10);
  CHECK(error_of([&] { v.write(fd, "x"); }) == Errc::bad_handle);
  v.close(fd);

  fd = v.open("/f", of::write | of::append);
  v.write(fd, "ab");
  v.close(fd);
  CHECK(v.stat("/f").size == 12);
  fd = v.open("/f", of::write | of::truncate);
  CHECK(v.stat("/f").size == 0);
  v.close(fd);
}

TEST_CASE("directories") {
  Vfs v;
  v.mount(std::make_shared<RamFs>(), "/");
  v.mkdir("/etc");
  int fd = v.open("/etc/motd", of::write | of::create);
  v.close(fd);
  CHECK(error_of([&] { v.open("/etc", of::read); }) == Errc::is_directory);
  CHECK(error_of([&] { v.open("/etc/motd/x", of::read); }) == Errc::not_directory);
  CHECK(error_of([&] { v.open("/nodir/x", of::write | of::create); }) == Errc::not_found);
  CHECK(error_of([&] { v.mkdir("/etc"); }) == Errc::already_exists);
  CHECK(v.stat("/etc").size == 1);
  CHECK(v.open_count() == 0);
}

TEST_CASE("lowest free descriptor is reused") {
  Vfs v;
  v.mount(std::make_shared<RamFs>(), "/");
  int a = v.open("/a", of::write | of::create);
  int b = v.open("/b", of::write | of::create);
  CHECK(b == a + 1);
  v.close(a);
  CHECK(v.open("/c", of::write | of::create) == a);
  CHECK(error_of([&] { v.close(a + 7); }) == Errc::bad_handle);
}

TEST_CASE("errno twins") {
  Vfs v;
  v.mount(std::make_shared<RamFs>(), "/");
  CHECK(v.try_open("/missing", of::read) == -ENOENT);
  CHECK(v.try_close(99) == -EBADF);
  StatInfo st;
  CHECK(v.try_stat("/", st) == 0);
  const int fd = v.try_open("/x", of::write | of::create);
  CHECK(fd >= 0);
  const auto data = bytes("abc");
  CHECK(v.try_write(fd, data) == 3);
}

TEST_CASE("ramfs last writer wins across handles") {
  Vfs v;
  v.mount(std::make_shared<RamFs>(), "/");
  std::vector<std::byte> model;
  std::mt19937 rng(2);
  std::vector<int> fds;
  for (int i = 0; i < 3; ++i) fds.push_back(v.open("/shared", of::read | of::write | of::create));
  for (int op = 0; op < 2000; ++op) {
    const int fd = fds[rng() % fds.size()];
    const std::uint64_t cur = v.handle(fd).cursor;
    if (rng() % 2) {
      std::vector<std::byte> chunk(1 + rng() % 16);
      for (auto& b : chunk) b = static_cast<std::byte>(rng());
      v.write(fd, chunk);
      if (cur + chunk.size() > model.size()) model.resize(cur + chunk.size());
      std::memcpy(model.data() + cur, chunk.data(), chunk.size());
    } else {
      const std::size_t n = rng() % 32;
      const auto got = v.read(fd, n);
      const std::size_t expect = cur >= model.size() ? 0 : std::min(n, model.size() - cur);
      REQUIRE(got.size() == expect);
      REQUIRE(std::equal(got.begin(), got.end(), model.begin() + std::min(cur, model.size())));
    }
    if (rng() % 10 == 0) {
      v.close(fd);
      fds.erase(std::find(fds.begin(), fds.end(), fd));
      fds.push_back(v.open("/shared", of::read | of::write));
    }
  }
  CHECK(v.stat("/shared").size == model.size());
}

TEST_CASE("shfs_build examples") {
  test::Corpus three = {{"a", bytes("1")}, {"b", bytes("22")}, {"c", bytes("333")}};
  auto img = ShfsImage::build(three);
  CHECK(img.bucket_count() == 8);
  CHECK(img.entries().size() == 3);
  CHECK(img.entries()[2].offset == 3);
  CHECK(img.blob().size() == 6);
  CHECK(ShfsImage::build({}).bucket_count() == 1);
  CHECK(ShfsImage::build({{"x", {}}}).bucket_count() == 2);
  CHECK(ShfsImage::build(test::make_corpus(5, 1)).bucket_count() == 16);

  test::Corpus dup = {{"a", bytes("1")}, {"a", bytes("2")}};
  CHECK(error_of([&] { ShfsImage::build(dup); }) == Errc::duplicate_name);
}

TEST_CASE("fnv1a64 known vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("serialization is bit-exact and round-trips") {
  const auto corpus = test::make_corpus(200, 9);
  const auto img = ShfsImage::build(corpus);
  const auto wire = img.serialize();
  CHECK(wire == reference_encode(img.bucket_count(), corpus));
  const auto back = ShfsImage::deserialize(wire);
  CHECK(back.serialize() == wire);
  CHECK(back.entries() == img.entries());
  CHECK(back.bucket_count() == img.bucket_count());
  for (const auto& [name, data] : corpus) {
    const ShfsEntry* e = back.find(name);
    REQUIRE(e != nullptr);
    auto c = back.contents(*e);
    CHECK(std::equal(c.begin(), c.end(), data.begin(), data.end()));
  }
}

TEST_CASE("corrupt images are rejected") {
  const auto wire = ShfsImage::build(test::make_corpus(20, 4)).serialize();
  auto bad = wire;
  bad[0] = std::byte{'X'};
  CHECK(error_of([&] { ShfsImage::deserialize(bad); }) == Errc::corrupt_image);
  bad = wire;
  bad[5] = std::byte{3};  // bucket_count 3
  CHECK(error_of([&] { ShfsImage::deserialize(bad); }) == Errc::corrupt_image);
  bad = wire;
  bad[13] ^= std::byte{1};  // first name hash
  CHECK(error_of([&] { ShfsImage::deserialize(bad); }) == Errc::corrupt_image);
  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, std::size_t{40}}) {
    std::vector<std::byte> part(wire.begin(), wire.begin() + cut);
    CHECK(error_of([&] { ShfsImage::deserialize(part); }) == Errc::corrupt_image);
  }
  // Trimming the blob pushes the last entry past its end.
  std::vector<std::byte> shorter(wire.begin(), wire.end() - 1);
  CHECK(error_of([&] { ShfsImage::deserialize(shorter); }) == Errc::corrupt_image);
}

TEST_CASE("shfs_open agrees with a linear scan") {
  const auto corpus = test::make_corpus(1000, 17);
  const auto img = ShfsImage::build(corpus);
  const auto queries = test::make_queries(corpus, 10000, 18);
  std::size_t hits = 0;
  for (const auto& q : queries) {
    const auto* expect = test::linear_find(corpus, q);
    std::size_t probes = 0;
    const ShfsEntry* got = img.find(q, &probes);
    const std::uint32_t bucket = fnv1a64(q) & (img.bucket_count() - 1);
    CHECK(probes <= img.chain_length(bucket));
    if (expect == nullptr) {
      REQUIRE(got == nullptr);
      CHECK(probes == img.chain_length(bucket));
      CHECK(error_of([&] { shfs_open(img, q); }) == Errc::not_found);
      continue;
    }
    ++hits;
    REQUIRE(got != nullptr);
    const ShfsHandle h = shfs_open(img, q);
    CHECK(h.length() == expect->second.size());
    CHECK(std::equal(h.data.begin(), h.data.end(), expect->second.begin(), expect->second.end()));
  }
  CHECK(hits > 4000);
  CHECK(hits < 6000);
}

TEST_CASE("chains keep insertion order under forced collisions") {
  // 64 names in 128 buckets: look for a populated chain of length >= 2.
  const auto corpus = test::make_corpus(64, 3);
  const auto img = ShfsImage::build(corpus);
  bool saw_chain = false;
  for (std::uint32_t b = 0; b < img.bucket_count(); ++b) {
    if (img.chain_length(b) < 2) continue;
    saw_chain = true;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if ((fnv1a64(corpus[i].first) & (img.bucket_count() - 1)) == b) idx.push_back(i);
    }
    // Later entries need strictly more probes.
    std::size_t prev = 0;
    for (std::size_t i : idx) {
      std::size_t probes = 0;
      img.find(corpus[i].first, &probes);
      CHECK(probes == prev + 1);
      prev = probes;
    }
  }
  CHECK(saw_chain);
}

TEST_CASE("shfs through the vfs returns the same bytes") {
  const auto corpus = test::make_corpus(50, 21);
  auto img = std::make_shared<const ShfsImage>(ShfsImage::build(corpus));
  Vfs v;
  v.mount(std::make_shared<RamFs>(), "/");
  v.mount(std::make_shared<ShfsFs>(img), "/www");
  for (const auto& [name, data] : corpus) {
    const int fd = v.open("/www/" + name, of::read);
    const auto got = v.read(fd, data.size() + 10);
    CHECK(got == data);
    v.close(fd);
    const ShfsHandle h = shfs_open(*img, name);
    CHECK(std::equal(h.data.begin(), h.data.end(), got.begin(), got.end()));
  }
  CHECK(error_of([&] { v.open("/www/" + corpus[0].first, of::write); }) == Errc::read_only_fs);
  CHECK(error_of([&] { v.open("/www/new", of::write | of::create); }) == Errc::read_only_fs);
  CHECK(error_of([&] { v.open("/www/nope", of::read); }) == Errc::not_found);
  CHECK(error_of([&] { v.mkdir("/www/d"); }) == Errc::read_only_fs);
  CHECK(v.stat("/www").size == 50);
  CHECK(error_of([&] { v.mount(std::make_shared<RamFs>(), "/www/"); }) == Errc::already_exists);
  // Paths outside the shfs mount still land on the root ramfs.
  const int fd = v.open("/wwwx", of::write | of::create);
  v.close(fd);
  CHECK(v.stat("/wwwx").kind == NodeKind::file);
}
