#pragma once

// Desk-scale benchmarks. Every result keeps its raw samples; the summary is
// recomputed from them on demand.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uk/alloc.hpp"
#include "uk/vfs.hpp"

namespace uk::bench {

struct Summary {
  double median = 0;
  double p10 = 0;
  double p90 = 0;
};

// Linear interpolation between closest ranks; q in [0, 1].
double quantile(std::vector<double> samples, double q);
Summary summarize(const std::vector<double>& samples);

struct BenchResult {
  std::string name;
  std::map<std::string, std::string> params;
  std::string unit;  // "ns" or "ops_per_s"
  std::vector<double> samples;
  // Recorded failures, e.g. an allocator running dry mid-run.
  std::vector<std::string> failures;

  Summary summary() const { return summarize(samples); }
};

// Raises bad_params on an empty sample list.
BenchResult make_result(std::string name, std::map<std::string, std::string> params,
                        std::string unit, std::vector<double> samples);

inline constexpr std::string_view kCsvHeader = "name,params,median_ns,p10_ns,p90_ns,samples";

// Params as k=v;k=v, samples space separated.
std::string to_csv(const std::vector<BenchResult>& results);
std::string to_json(const std::vector<BenchResult>& results);

struct Repeat {
  int reps = 20;
  int warmup = 2;  // discarded
};

// --- allocators ------------------------------------------------------------

// One result per backend; samples are init times in ns.
std::vector<BenchResult> bench_alloc_init(const std::vector<alloc::BackendKind>& backends,
                                          std::size_t heap_bytes, Repeat r = {});

enum class Pattern : std::uint8_t { churn, ramp, mixed };
std::string_view to_string(Pattern p) noexcept;
std::optional<Pattern> parse_pattern(std::string_view s) noexcept;

struct WorkloadOptions {
  std::size_t ops = 100000;
  std::size_t heap_bytes = std::size_t{64} << 20;
  std::uint64_t seed = 1;
  // Checks every live block against all others; slow but exact.
  bool check_disjoint = false;
};

// Samples are ops/s. out_of_memory ends a rep early and lands in failures.
BenchResult bench_alloc_workload(alloc::BackendKind backend, Pattern pattern,
                                 const WorkloadOptions& opt, Repeat r = {});

// --- packet batching -------------------------------------------------------

// Samples are packets/s over a loopback pair, one rep per `duration_ms`.
std::vector<BenchResult> bench_net_batch(const std::vector<std::uint16_t>& batch_sizes,
                                         std::uint32_t duration_ms, Repeat r = {});

// --- syscall dispatch ------------------------------------------------------

struct DispatchResult {
  BenchResult direct_call;
  BenchResult shim_dispatch;
  BenchResult host_trap;
};

// Samples are ns per invocation.
DispatchResult bench_dispatch(std::size_t invocations, Repeat r = {});

// --- VFS bypass ------------------------------------------------------------

using Corpus = std::vector<vfs::ShfsImage::Input>;

Corpus make_corpus(std::size_t n, std::uint64_t seed);
// Alternates hits and near misses.
std::vector<std::string> make_queries(const Corpus& corpus, std::size_t n, std::uint64_t seed);

struct FsOpenResult {
  BenchResult vfs_path;
  BenchResult shfs_bypass;
  std::vector<bool> found;  // per query, agreed by both paths
};

// Verdicts are compared before anything is timed; a disagreement raises
// not_equivalent. Samples are mean ns per open.
FsOpenResult bench_fs_open(const Corpus& corpus, const std::vector<std::string>& queries,
                           Repeat r = {});

// --- key-value demo --------------------------------------------------------

enum class KvOp : std::uint8_t { get = 0, set = 1 };

struct KvMessage {
  KvOp op = KvOp::get;
  std::string key;    // 1..64 bytes
  std::string value;  // up to 1024 bytes
  bool operator==(const KvMessage&) const = default;
};

inline constexpr std::size_t kMaxKey = 64;
inline constexpr std::size_t kMaxValue = 1024;

// [op u8][key_len u8][key][val_len u16 le][value]
std::size_t encoded_size(const KvMessage& m) noexcept;
// Raises invalid_argument for oversized fields.
void encode(const KvMessage& m, std::vector<std::byte>& out);
std::size_t encode_into(KvOp op, std::string_view key, std::string_view value,
                        std::span<std::byte> out);
// Whole buffer must be exactly one message.
std::optional<KvMessage> decode(std::span<const std::byte> in);

struct KvView {
  KvOp op;
  std::string_view key;
  std::string_view value;
};
std::optional<KvView> decode_view(std::span<const std::byte> in) noexcept;

enum class KvMode : std::uint8_t { layered, specialized };
std::string_view to_string(KvMode m) noexcept;

// Requests as encoded wire messages; about one in 500 is malformed.
std::vector<std::vector<std::byte>> make_kv_requests(std::size_t n, std::uint64_t seed);

struct KvRun {
  std::vector<std::byte> responses;  // concatenated encoded replies, in order
  std::uint64_t served = 0;
  std::uint64_t decode_errors = 0;
  double seconds = 0;
};

// Client and server run on two execution contexts over a loopback pair.
KvRun kv_demo(KvMode mode, const std::vector<std::vector<std::byte>>& requests);

struct KvComparison {
  BenchResult layered;
  BenchResult specialized;
  std::uint64_t decode_errors = 0;
};

// Asserts byte-identical responses first (not_equivalent otherwise), then
// times both modes. Samples are requests/s.
KvComparison bench_kv(std::size_t requests, Repeat r = {}, std::uint64_t seed = 7);

}  // namespace uk::bench
