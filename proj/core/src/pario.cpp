#include "wallresp/pario.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstring>

#include "wallresp/error.hpp"

namespace wallresp::pario {

static_assert(std::endian::native == std::endian::little,
              "payload serialization assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'W', 'R', 'M'};

template <class T>
void put_le(std::byte* dst, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    dst[i] = static_cast<std::byte>((v >> (8 * i)) & 0xff);
  }
}

template <class T>
T get_le(const std::byte* src) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(src[i]) << (8 * i);
  return v;
}

std::string sys_error(const std::string& what, const std::string& path) {
  return what + " '" + path + "': " + std::strerror(errno);
}

// Root-only: read `len` bytes at `offset`. Returns an error message or "".
std::string read_exact(const std::string& path, std::uint64_t offset, std::byte* dst,
                       std::uint64_t len) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) return sys_error("cannot open", path);
  std::uint64_t done = 0;
  std::string err;
  while (done < len) {
    const ssize_t got = ::pread(fd, dst + done, len - done, static_cast<off_t>(offset + done));
    if (got < 0 && errno == EINTR) continue;
    if (got < 0) {
      err = sys_error("read failed on", path);
      break;
    }
    if (got == 0) {
      err = "truncated header in '" + path + "' at offset " + std::to_string(offset);
      break;
    }
    done += static_cast<std::uint64_t>(got);
  }
  ::close(fd);
  return err;
}

std::string file_size(const std::string& path, std::uint64_t& size) {
  struct stat st {};
  if (::stat(path.c_str(), &st) != 0) return sys_error("cannot stat", path);
  size = static_cast<std::uint64_t>(st.st_size);
  return {};
}

// Root computes, everyone receives; errors are thrown on every rank.
void agree(comm::RankCtx& ctx, const std::string& root_error) {
  auto msg = comm::bytes_string(ctx.broadcast(0, comm::string_bytes(root_error)));
  if (!msg.empty()) throw IoError(msg);
}

void add_extent(comm::FileView& v, std::uint64_t offset, std::uint64_t length) {
  if (length == 0) return;
  if (!v.extents.empty()) {
    auto& last = v.extents.back();
    if (last.offset + last.length == offset) {
      last.length += length;
      return;
    }
  }
  v.extents.push_back({offset, length});
}

}  // namespace

std::array<std::byte, kHeaderBytes> MatrixFileHeader::encode() const {
  std::array<std::byte, kHeaderBytes> b{};
  std::memcpy(b.data(), kMagic, 4);
  put_le<std::uint32_t>(b.data() + 4, version);
  put_le<std::uint32_t>(b.data() + 8, dtype);
  put_le<std::uint32_t>(b.data() + 12, order);
  put_le<std::uint64_t>(b.data() + 16, m);
  put_le<std::uint64_t>(b.data() + 24, n);
  return b;
}

MatrixFileHeader MatrixFileHeader::decode(std::span<const std::byte> b) {
  if (b.size() < kHeaderBytes) {
    throw FormatError("header: need 32 bytes, got " + std::to_string(b.size()));
  }
  if (std::memcmp(b.data(), kMagic, 4) != 0) {
    std::string got(reinterpret_cast<const char*>(b.data()), 4);
    throw FormatError("header: bad magic '" + got + "', expected 'SWRM'");
  }
  MatrixFileHeader h;
  h.version = get_le<std::uint32_t>(b.data() + 4);
  h.dtype = get_le<std::uint32_t>(b.data() + 8);
  h.order = get_le<std::uint32_t>(b.data() + 12);
  h.m = get_le<std::uint64_t>(b.data() + 16);
  h.n = get_le<std::uint64_t>(b.data() + 24);
  if (h.version != 1) throw FormatError("header: unsupported version " + std::to_string(h.version));
  if (h.dtype != 1) throw FormatError("header: unsupported dtype code " + std::to_string(h.dtype));
  if (h.order != 1) throw FormatError("header: unsupported order code " + std::to_string(h.order));
  return h;
}

std::uint64_t call_cap(std::uint64_t chunk_limit, std::uint64_t elem_bytes) {
  return std::max<std::uint64_t>(1, std::min(chunk_limit, kMaxCallBytes / elem_bytes));
}

std::vector<Chunk> plan_chunks(std::uint64_t total, std::uint64_t chunk_limit,
                               std::uint64_t elem_bytes) {
  if (chunk_limit < 1 || elem_bytes < 1) {
    throw std::invalid_argument("plan_chunks: chunk_limit and elem_bytes must be >= 1");
  }
  const std::uint64_t cap = call_cap(chunk_limit, elem_bytes);
  std::vector<Chunk> plan;
  for (std::uint64_t off = 0; off < total; off += cap) plan.push_back({off, std::min(cap, total - off)});
  return plan;
}

comm::FileView block_cyclic_view(const BlockCyclicMatrix& a, std::uint64_t record_offset) {
  comm::FileView v;
  const std::uint64_t base = record_offset + kHeaderBytes;
  const auto n = static_cast<std::uint64_t>(a.cols());
  const Index lc = a.local().cols();
  for (Index li = 0; li < a.local().rows(); ++li) {
    const auto i = static_cast<std::uint64_t>(a.global_row(li));
    Index lj = 0;
    while (lj < lc) {
      // run of consecutive global columns
      Index end = lj + 1;
      while (end < lc && a.global_col(end) == a.global_col(end - 1) + 1) ++end;
      const auto j = static_cast<std::uint64_t>(a.global_col(lj));
      add_extent(v, base + 8 * (i * n + j), 8 * static_cast<std::uint64_t>(end - lj));
      lj = end;
    }
  }
  return v;
}

comm::FileView striped_view(const StripedMatrix& s, std::uint64_t record_offset) {
  comm::FileView v;
  const std::uint64_t base = record_offset + kHeaderBytes;
  const auto n = static_cast<std::uint64_t>(s.cols());
  const Index lo = s.ind_start - 1;
  const Index hi = s.ind_end;  // exclusive, 0-based
  if (hi <= lo) return v;
  if (!s.distrib) {
    add_extent(v, base, 8 * static_cast<std::uint64_t>(s.rows()) * n);
  } else if (s.row_wise) {
    add_extent(v, base + 8 * static_cast<std::uint64_t>(lo) * n,
               8 * static_cast<std::uint64_t>(hi - lo) * n);
  } else {
    for (Index i = 0; i < s.rows(); ++i) {
      add_extent(v, base + 8 * (static_cast<std::uint64_t>(i) * n + static_cast<std::uint64_t>(lo)),
                 8 * static_cast<std::uint64_t>(hi - lo));
    }
  }
  return v;
}

comm::FileView slice_view(const comm::FileView& v, std::uint64_t begin, std::uint64_t length) {
  comm::FileView out;
  const std::uint64_t end = begin + length;
  std::uint64_t pos = 0;
  for (const auto& e : v.extents) {
    const std::uint64_t e_end = pos + e.length;
    const std::uint64_t lo = std::max(pos, begin);
    const std::uint64_t hi = std::min(e_end, end);
    if (lo < hi) out.extents.push_back({e.offset + (lo - pos), hi - lo});
    pos = e_end;
    if (pos >= end) break;
  }
  return out;
}

TransferStats write_distributed(comm::RankCtx& ctx, const std::string& path,
                                const BlockCyclicMatrix& a, std::uint64_t chunk_limit,
                                std::uint64_t record_offset, bool truncate) {
  if (chunk_limit < 1) throw std::invalid_argument("write_distributed: chunk_limit must be >= 1");

  std::string err;
  if (ctx.is_root()) {
    const int flags = O_WRONLY | O_CREAT | (truncate ? O_TRUNC : 0);
    const int fd = ::open(path.c_str(), flags, 0644);
    if (fd < 0) {
      err = sys_error("cannot open for writing", path);
    } else {
      MatrixFileHeader h;
      h.m = static_cast<std::uint64_t>(a.rows());
      h.n = static_cast<std::uint64_t>(a.cols());
      const auto hb = h.encode();
      if (::pwrite(fd, hb.data(), hb.size(), static_cast<off_t>(record_offset)) !=
          static_cast<ssize_t>(hb.size())) {
        err = sys_error("header write failed on", path);
      }
      ::close(fd);
    }
  }
  agree(ctx, err);

  // Row-major pack of the owned block.
  const Dense& loc = a.local();
  std::vector<double> buf;
  buf.reserve(static_cast<std::size_t>(loc.size()));
  for (Index li = 0; li < loc.rows(); ++li) {
    for (Index lj = 0; lj < loc.cols(); ++lj) buf.push_back(loc(li, lj));
  }
  const auto view = block_cyclic_view(a, record_offset);
  const auto plan = plan_chunks(buf.size(), chunk_limit);
  const std::uint64_t ncalls = ctx.allreduce_max(static_cast<std::uint64_t>(plan.size()));

  TransferStats st;
  const auto* bytes = reinterpret_cast<const std::byte*>(buf.data());
  for (std::uint64_t c = 0; c < ncalls; ++c) {
    if (c < plan.size()) {
      const auto& ch = plan[c];
      const auto sub = slice_view(view, 8 * ch.offset, 8 * ch.count);
      ctx.collective_write(path, sub, std::span<const std::byte>(bytes + 8 * ch.offset, 8 * ch.count));
      ++st.data_calls;
    } else {
      ctx.collective_write(path, comm::FileView{}, {});
    }
    ++st.calls;
  }
  return st;
}

StripedMatrix read_striped(comm::RankCtx& ctx, const std::string& path, bool row_wise,
                           std::uint64_t chunk_limit, std::uint64_t record_offset,
                           TransferStats* stats) {
  if (chunk_limit < 1) throw std::invalid_argument("read_striped: chunk_limit must be >= 1");

  // [error?, header bytes, file size]
  std::array<std::byte, kHeaderBytes> hb{};
  std::uint64_t size = 0;
  std::string err;
  if (ctx.is_root()) {
    err = file_size(path, size);
    if (err.empty()) err = read_exact(path, record_offset, hb.data(), kHeaderBytes);
  }
  agree(ctx, err);
  comm::Bytes meta(hb.begin(), hb.end());
  meta.resize(kHeaderBytes + 8);
  std::memcpy(meta.data() + kHeaderBytes, &size, 8);
  meta = ctx.broadcast(0, std::move(meta));
  std::memcpy(&size, meta.data() + kHeaderBytes, 8);

  const MatrixFileHeader h = MatrixFileHeader::decode(std::span(meta).first(kHeaderBytes));
  if (size < record_offset + h.record_bytes()) {
    throw FormatError("payload truncated: " + std::to_string(h.m) + "x" + std::to_string(h.n) +
                      " record at offset " + std::to_string(record_offset) + " needs " +
                      std::to_string(h.record_bytes()) + " bytes, file has " +
                      std::to_string(size - std::min(size, record_offset)));
  }

  StripedMatrix s = create_striped(static_cast<Index>(h.m), static_cast<Index>(h.n), row_wise,
                                   ctx.size(), ctx.rank());
  const auto view = striped_view(s, record_offset);
  const auto total = view.bytes() / 8;
  const auto plan = plan_chunks(total, chunk_limit);
  const std::uint64_t ncalls = ctx.allreduce_max(static_cast<std::uint64_t>(plan.size()));

  std::vector<double> buf(total);
  auto* dst = reinterpret_cast<std::byte*>(buf.data());
  TransferStats st;
  for (std::uint64_t c = 0; c < ncalls; ++c) {
    if (c < plan.size()) {
      const auto& ch = plan[c];
      auto got = ctx.collective_read(path, slice_view(view, 8 * ch.offset, 8 * ch.count));
      std::memcpy(dst + 8 * ch.offset, got.data(), got.size());
      ++st.data_calls;
    } else {
      ctx.collective_read(path, comm::FileView{});
    }
    ++st.calls;
  }
  if (stats) *stats = st;

  const Index r = s.loc_mat.rows();
  const Index cc = s.loc_mat.cols();
  for (Index i = 0; i < r; ++i) {
    for (Index j = 0; j < cc; ++j) s.loc_mat(i, j) = buf[static_cast<std::size_t>(i * cc + j)];
  }
  return s;
}

std::vector<RecordInfo> scan_records(comm::RankCtx& ctx, const std::string& path) {
  std::vector<std::uint64_t> flat;
  std::string err;
  if (ctx.is_root()) {
    try {
      std::uint64_t size = 0;
      err = file_size(path, size);
      std::uint64_t off = 0;
      while (err.empty() && off < size) {
        std::array<std::byte, kHeaderBytes> hb{};
        err = read_exact(path, off, hb.data(), kHeaderBytes);
        if (!err.empty()) break;
        const auto h = MatrixFileHeader::decode(hb);
        if (off + h.record_bytes() > size) {
          err = "payload truncated in record at offset " + std::to_string(off);
          break;
        }
        flat.insert(flat.end(), {off, h.m, h.n});
        off += h.record_bytes();
      }
    } catch (const std::exception& e) {
      err = e.what();
    }
  }
  agree(ctx, err);
  flat = comm::from_bytes<std::uint64_t>(ctx.broadcast(0, comm::to_bytes(flat)));
  std::vector<RecordInfo> out;
  for (std::size_t k = 0; k + 2 < flat.size(); k += 3) {
    RecordInfo ri;
    ri.offset = flat[k];
    ri.header.m = flat[k + 1];
    ri.header.n = flat[k + 2];
    out.push_back(ri);
  }
  return out;
}

const std::vector<std::string>& response_record_names() {
  static const std::vector<std::string> names = {"gamma", "a_ye", "a_ey", "d_ee", "s_ww_inv"};
  return names;
}

void write_response(comm::RankCtx& ctx, const std::string& path, const ResponseSet& r,
                    std::uint64_t chunk_limit) {
  const auto nd_w = static_cast<Index>(r.gamma.size());
  BlockCyclicMatrix gamma(like(r.s_ww_inv.desc(), nd_w, 1));
  gamma.for_each_owned([&](Index i, Index, double& v) { v = r.gamma[static_cast<std::size_t>(i)]; });

  std::uint64_t off = 0;
  bool first = true;
  const BlockCyclicMatrix* records[] = {&gamma, &r.a_ye, &r.a_ey, &r.d_ee, &r.s_ww_inv};
  for (const BlockCyclicMatrix* m : records) {
    write_distributed(ctx, path, *m, chunk_limit, off, first);
    off += kHeaderBytes + matrix_bytes(m->rows(), m->cols());
    first = false;
  }
}

}  // namespace wallresp::pario
