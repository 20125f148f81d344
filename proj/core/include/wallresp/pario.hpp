#pragma once

// Single-file collective matrix I/O.
//
// A matrix record is a 32-byte little-endian header followed by the payload
// as row-major little-endian doubles:
//
//   offset  size  field
//        0     4  magic "SWRM"
//        4     4  version (1)
//        8     4  dtype   (1 = float64)
//       12     4  order   (1 = row-major)
//       16     8  M
//       24     8  N
//
// Every transfer is split into collective calls of at most
// min(chunk_limit, (2^31-1)/8) elements per rank, and all ranks issue the
// same number of calls.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wallresp/comm.hpp"
#include "wallresp/dmat.hpp"
#include "wallresp/pipeline.hpp"

namespace wallresp::pario {

inline constexpr std::uint64_t kHeaderBytes = 32;
inline constexpr std::uint64_t kDefaultChunkLimit = std::uint64_t{1} << 28;
inline constexpr std::uint64_t kMaxCallBytes = 2147483647;  // 2^31 - 1

struct MatrixFileHeader {
  std::uint32_t version = 1;
  std::uint32_t dtype = 1;
  std::uint32_t order = 1;
  std::uint64_t m = 0;
  std::uint64_t n = 0;

  std::array<std::byte, kHeaderBytes> encode() const;
  /// Throws FormatError naming the offending field.
  static MatrixFileHeader decode(std::span<const std::byte> bytes);
  std::uint64_t payload_bytes() const { return 8 * m * n; }
  std::uint64_t record_bytes() const { return kHeaderBytes + payload_bytes(); }
};

struct Chunk {
  std::uint64_t offset = 0;  // in elements
  std::uint64_t count = 0;
};

/// Largest element count one call may carry.
std::uint64_t call_cap(std::uint64_t chunk_limit, std::uint64_t elem_bytes = 8);

/// Greedy split of `total` elements into calls of at most call_cap elements.
std::vector<Chunk> plan_chunks(std::uint64_t total, std::uint64_t chunk_limit,
                               std::uint64_t elem_bytes = 8);

/// File extents of the calling rank's block-cyclic elements, in the order of
/// its owned rows and then owned columns; adjacent extents are merged.
comm::FileView block_cyclic_view(const BlockCyclicMatrix& a, std::uint64_t record_offset);

/// File extents of a striped chunk (row-major within the chunk).
comm::FileView striped_view(const StripedMatrix& s, std::uint64_t record_offset);

/// Sub-view covering bytes [begin, begin + length) of the view's stream.
comm::FileView slice_view(const comm::FileView& v, std::uint64_t begin, std::uint64_t length);

struct TransferStats {
  std::uint64_t calls = 0;       // collective data calls issued by this rank
  std::uint64_t data_calls = 0;  // of those, calls that moved bytes
};

/// Collective. Writes one record at `record_offset` (rank 0 writes the
/// header). With `truncate`, the file is emptied first.
TransferStats write_distributed(comm::RankCtx& ctx, const std::string& path,
                                const BlockCyclicMatrix& a,
                                std::uint64_t chunk_limit = kDefaultChunkLimit,
                                std::uint64_t record_offset = 0, bool truncate = true);

/// Collective. Rank 0 reads and validates the header and broadcasts it;
/// every rank then reads its stripe.
StripedMatrix read_striped(comm::RankCtx& ctx, const std::string& path, bool row_wise,
                           std::uint64_t chunk_limit = kDefaultChunkLimit,
                           std::uint64_t record_offset = 0, TransferStats* stats = nullptr);

struct RecordInfo {
  std::uint64_t offset = 0;
  MatrixFileHeader header;
};

/// Collective. Headers of all consecutive records in the file.
std::vector<RecordInfo> scan_records(comm::RankCtx& ctx, const std::string& path);

/// Record order of a response file.
const std::vector<std::string>& response_record_names();

/// Collective. gamma (nd_w x 1), a_ye, a_ey, d_ee, s_ww_inv.
void write_response(comm::RankCtx& ctx, const std::string& path, const ResponseSet& r,
                    std::uint64_t chunk_limit = kDefaultChunkLimit);

}  // namespace wallresp::pario
