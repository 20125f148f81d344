#pragma once

// In-process SPMD runtime. Each rank is a thread running the same program
// with its own RankCtx; collectives are synchronization points that every
// rank must enter in the same order. Calls are tagged with the operation
// and its parameters, so a rank entering a different collective than its
// peers gets a CollectiveError instead of a hang, and a rank that returns
// while others wait in a collective is reported as a deadlock.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "wallresp/error.hpp"
#include "wallresp/grid.hpp"

namespace wallresp::comm {

using Bytes = std::vector<std::byte>;

/// Mismatched collective order, deadlock, or an aborted peer.
class CollectiveError : public Error {
 public:
  using Error::Error;
};

/// Thrown in ranks that were blocked in a collective when a peer failed.
/// Secondary to the peer's own error.
class RankAborted : public CollectiveError {
 public:
  using CollectiveError::CollectiveError;
};

struct Extent {
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  bool operator==(const Extent&) const = default;
};

/// Byte ranges of a shared file owned by one rank, in the order the rank's
/// local buffer is laid out.
struct FileView {
  std::vector<Extent> extents;

  std::uint64_t bytes() const;
};

struct CollectiveStats {
  std::uint64_t collectives = 0;      // every collective call, including file calls
  std::uint64_t file_calls = 0;       // collective_write / collective_read calls
  std::uint64_t file_data_calls = 0;  // file calls that moved at least one byte
};

struct SpawnOptions {
  /// Forces the process-grid row count (must divide P).
  std::optional<int> grid_rows;
  /// Cross-rank consistency checks such as overlapping file views.
#ifdef NDEBUG
  bool debug_checks = false;
#else
  bool debug_checks = true;
#endif
  /// Zero waits forever; otherwise a collective that does not complete in
  /// time raises CollectiveError.
  std::chrono::milliseconds timeout{0};
};

class World;

class RankCtx {
 public:
  RankCtx(World& world, int rank, ProcessGrid grid, bool debug_checks);
  RankCtx(const RankCtx&) = delete;
  RankCtx& operator=(const RankCtx&) = delete;

  int rank() const { return rank_; }
  int size() const;
  bool is_root() const { return rank_ == 0; }
  const ProcessGrid& grid() const { return grid_; }
  bool debug_checks() const { return debug_checks_; }
  const CollectiveStats& stats() const { return stats_; }

  void barrier();

  /// Every rank returns a byte-identical copy of root's payload. Payloads
  /// passed by other ranks are ignored.
  Bytes broadcast(int root, Bytes payload);

  /// Element r of the result is rank r's payload.
  std::vector<Bytes> allgather(Bytes payload);

  /// outgoing[q] is delivered to rank q; element r of the result came from
  /// rank r.
  std::vector<Bytes> alltoallv(std::vector<Bytes> outgoing);

  /// Elementwise sum, reduced in rank order 0..P-1 on every rank so the
  /// result is bit-identical everywhere.
  std::vector<double> allreduce_sum(std::span<const double> x);
  double allreduce_max(double x);
  std::uint64_t allreduce_max(std::uint64_t x);
  bool allreduce_or(bool x);

  /// Each rank writes `local` to the byte ranges of `view` in a shared file.
  /// Ranks with an empty view still take part. The file is created if it
  /// does not exist and is never truncated here.
  void collective_write(const std::string& path, const FileView& view,
                        std::span<const std::byte> local);

  /// Counterpart of collective_write; returns the bytes of `view` in order.
  Bytes collective_read(const std::string& path, const FileView& view);

 private:
  void enter(std::string tag, std::vector<Bytes> out);
  void leave();
  std::vector<Bytes>& slot_out(int r);

  World* world_;
  int rank_;
  ProcessGrid grid_;
  bool debug_checks_;
  CollectiveStats stats_;
};

/// Runs `program` on P ranks and returns one exit status per rank (0 on
/// success). Exceptions are not propagated; use `run` for that.
std::vector<int> spawn(int nranks, const std::function<void(RankCtx&)>& program,
                       const SpawnOptions& opts = {});

/// Runs `program` on P ranks and returns the captured exception of each rank
/// (null on success).
std::vector<std::exception_ptr> launch(int nranks, const std::function<void(RankCtx&)>& program,
                                       const SpawnOptions& opts = {});

/// Rethrows the root-cause error among per-rank outcomes: the lowest rank
/// whose error is not a RankAborted, falling back to the first error.
void rethrow_first(const std::vector<std::exception_ptr>& errors);

/// Runs `program` on P ranks and collects each rank's return value.
/// Rethrows the root-cause error if any rank failed.
template <class F>
auto run(int nranks, F&& program, const SpawnOptions& opts = {}) {
  using R = std::invoke_result_t<F&, RankCtx&>;
  if constexpr (std::is_void_v<R>) {
    rethrow_first(launch(nranks, [&](RankCtx& ctx) { program(ctx); }, opts));
  } else {
    std::vector<std::optional<R>> slots(static_cast<std::size_t>(nranks));
    rethrow_first(launch(
        nranks, [&](RankCtx& ctx) { slots[static_cast<std::size_t>(ctx.rank())] = program(ctx); },
        opts));
    std::vector<R> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
  }
}

// Serialization helpers for trivially copyable element types.

template <class T>
Bytes to_bytes(std::span<const T> values) {
  static_assert(std::is_trivially_copyable_v<T>);
  Bytes b(values.size_bytes());
  if (!b.empty()) std::memcpy(b.data(), values.data(), b.size());
  return b;
}

template <class T>
Bytes to_bytes(const std::vector<T>& values) {
  return to_bytes(std::span<const T>(values));
}

template <class T>
std::vector<T> from_bytes(std::span<const std::byte> bytes) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (bytes.size() % sizeof(T) != 0) {
    throw FormatError("byte payload of " + std::to_string(bytes.size()) +
                      " bytes is not a whole number of elements");
  }
  std::vector<T> v(bytes.size() / sizeof(T));
  if (!v.empty()) std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

inline Bytes string_bytes(const std::string& s) {
  return to_bytes(std::span<const char>(s.data(), s.size()));
}

inline std::string bytes_string(std::span<const std::byte> b) {
  return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

}  // namespace wallresp::comm
