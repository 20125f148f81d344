#include "wallresp/comm.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <mutex>
#include <sstream>
#include <thread>
#include <utility>

namespace wallresp::comm {

std::uint64_t FileView::bytes() const {
  std::uint64_t total = 0;
  for (const auto& e : extents) total += e.length;
  return total;
}

class World {
 public:
  World(int nranks, std::chrono::milliseconds timeout)
      : nranks_(nranks), timeout_(timeout), slots_(static_cast<std::size_t>(nranks)) {}

  int size() const { return nranks_; }

  struct Slot {
    std::string tag;
    std::vector<Bytes> out;
  };
  Slot& slot(int r) { return slots_[static_cast<std::size_t>(r)]; }

  void arrive_and_wait(const std::string& tag) {
    std::unique_lock lk(mu_);
    check_alive_locked(tag);
    const std::uint64_t gen = generation_;
    if (++arrived_ == nranks_) {
      arrived_ = 0;
      ++generation_;
      cv_.notify_all();
      return;
    }
    auto released = [&] { return generation_ != gen || aborted_ || finished_ > 0; };
    if (timeout_.count() > 0) {
      if (!cv_.wait_for(lk, timeout_, released)) {
        aborted_ = true;
        abort_reason_ = "collective '" + tag + "' timed out (possible deadlock)";
        cv_.notify_all();
        throw CollectiveError(abort_reason_);
      }
    } else {
      cv_.wait(lk, released);
    }
    if (generation_ == gen) check_alive_locked(tag);
  }

  void abort(const std::string& reason) {
    std::lock_guard lk(mu_);
    if (!aborted_) {
      aborted_ = true;
      abort_reason_ = reason;
    }
    cv_.notify_all();
  }

  void finish() {
    std::lock_guard lk(mu_);
    ++finished_;
    cv_.notify_all();
  }

 private:
  void check_alive_locked(const std::string& tag) {
    if (aborted_) throw RankAborted("peer rank failed: " + abort_reason_);
    if (finished_ > 0) {
      throw CollectiveError("deadlock: " + std::to_string(finished_) +
                            " rank(s) returned while others wait in collective '" + tag + "'");
    }
  }

  int nranks_;
  std::chrono::milliseconds timeout_;
  std::vector<Slot> slots_;
  std::mutex mu_;
  std::condition_variable cv_;
  int arrived_ = 0;
  int finished_ = 0;
  std::uint64_t generation_ = 0;
  bool aborted_ = false;
  std::string abort_reason_;
};

RankCtx::RankCtx(World& world, int rank, ProcessGrid grid, bool debug_checks)
    : world_(&world), rank_(rank), grid_(grid), debug_checks_(debug_checks) {}

int RankCtx::size() const { return world_->size(); }

std::vector<Bytes>& RankCtx::slot_out(int r) { return world_->slot(r).out; }

void RankCtx::enter(std::string tag, std::vector<Bytes> out) {
  ++stats_.collectives;
  auto& mine = world_->slot(rank_);
  mine.tag = std::move(tag);
  mine.out = std::move(out);
  const std::string& my_tag = mine.tag;
  world_->arrive_and_wait(my_tag);
  for (int r = 0; r < size(); ++r) {
    const auto& other = world_->slot(r).tag;
    if (other != my_tag) {
      const int lo = std::min(r, rank_);
      const int hi = std::max(r, rank_);
      const auto& lo_tag = world_->slot(lo).tag;
      const auto& hi_tag = world_->slot(hi).tag;
      throw CollectiveError("collective mismatch at call " + std::to_string(stats_.collectives) +
                            ": rank " + std::to_string(lo) + " entered '" + lo_tag +
                            "', rank " + std::to_string(hi) + " entered '" + hi_tag + "'");
    }
  }
}

void RankCtx::leave() { world_->arrive_and_wait(world_->slot(rank_).tag); }

void RankCtx::barrier() {
  enter("barrier", {});
  leave();
}

Bytes RankCtx::broadcast(int root, Bytes payload) {
  if (root < 0 || root >= size()) throw std::out_of_range("broadcast root out of range");
  std::vector<Bytes> out;
  if (rank_ == root) out.push_back(std::move(payload));
  enter("broadcast(root=" + std::to_string(root) + ")", std::move(out));
  Bytes result = slot_out(root).front();
  leave();
  return result;
}

std::vector<Bytes> RankCtx::allgather(Bytes payload) {
  std::vector<Bytes> out;
  out.push_back(std::move(payload));
  enter("allgather", std::move(out));
  std::vector<Bytes> result;
  result.reserve(static_cast<std::size_t>(size()));
  for (int r = 0; r < size(); ++r) result.push_back(slot_out(r).front());
  leave();
  return result;
}

std::vector<Bytes> RankCtx::alltoallv(std::vector<Bytes> outgoing) {
  if (static_cast<int>(outgoing.size()) != size()) {
    throw std::invalid_argument("alltoallv needs one outgoing buffer per rank");
  }
  enter("alltoallv", std::move(outgoing));
  std::vector<Bytes> result(static_cast<std::size_t>(size()));
  for (int r = 0; r < size(); ++r) {
    result[static_cast<std::size_t>(r)] = std::move(slot_out(r)[static_cast<std::size_t>(rank_)]);
  }
  leave();
  return result;
}

std::vector<double> RankCtx::allreduce_sum(std::span<const double> x) {
  std::vector<Bytes> out;
  out.push_back(to_bytes(x));
  enter("allreduce_sum(len=" + std::to_string(x.size()) + ")", std::move(out));
  std::vector<double> sum(x.size(), 0.0);
  for (int r = 0; r < size(); ++r) {
    const auto& b = slot_out(r).front();
    const auto* v = reinterpret_cast<const double*>(b.data());
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += v[k];
  }
  leave();
  return sum;
}

double RankCtx::allreduce_max(double x) {
  auto all = allgather(to_bytes(std::span<const double>(&x, 1)));
  double m = x;
  for (const auto& b : all) m = std::max(m, from_bytes<double>(b).front());
  return m;
}

std::uint64_t RankCtx::allreduce_max(std::uint64_t x) {
  auto all = allgather(to_bytes(std::span<const std::uint64_t>(&x, 1)));
  std::uint64_t m = x;
  for (const auto& b : all) m = std::max(m, from_bytes<std::uint64_t>(b).front());
  return m;
}

bool RankCtx::allreduce_or(bool x) {
  const std::uint64_t v = x ? 1 : 0;
  return allreduce_max(v) != 0;
}

namespace {

Bytes encode_view(const FileView& v) {
  std::vector<std::uint64_t> flat;
  flat.reserve(v.extents.size() * 2);
  for (const auto& e : v.extents) {
    flat.push_back(e.offset);
    flat.push_back(e.length);
  }
  return to_bytes(flat);
}

std::vector<Extent> decode_view(const Bytes& b) {
  auto flat = from_bytes<std::uint64_t>(b);
  std::vector<Extent> ext;
  for (std::size_t k = 0; k + 1 < flat.size(); k += 2) ext.push_back({flat[k], flat[k + 1]});
  return ext;
}

// Returns a description of the first overlap between extents of different
// ranks, or an empty string.
std::string find_overlap(const std::vector<std::vector<Extent>>& views) {
  struct Tagged {
    Extent e;
    int rank;
  };
  std::vector<Tagged> all;
  for (std::size_t r = 0; r < views.size(); ++r) {
    for (const auto& e : views[r]) {
      if (e.length > 0) all.push_back({e, static_cast<int>(r)});
    }
  }
  std::sort(all.begin(), all.end(),
            [](const Tagged& a, const Tagged& b) { return a.e.offset < b.e.offset; });
  for (std::size_t k = 1; k < all.size(); ++k) {
    const auto& prev = all[k - 1];
    const auto& cur = all[k];
    if (cur.e.offset < prev.e.offset + prev.e.length && cur.rank != prev.rank) {
      std::ostringstream os;
      os << "overlapping file views: rank " << prev.rank << " [" << prev.e.offset << ","
         << prev.e.offset + prev.e.length << ") and rank " << cur.rank << " [" << cur.e.offset
         << "," << cur.e.offset + cur.e.length << ")";
      return os.str();
    }
  }
  return {};
}

struct Fd {
  int fd = -1;
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
};

std::string errno_message(const std::string& what, const std::string& path) {
  return what + " '" + path + "': " + std::strerror(errno);
}

}  // namespace

void RankCtx::collective_write(const std::string& path, const FileView& view,
                               std::span<const std::byte> local) {
  if (view.bytes() != local.size()) {
    throw std::invalid_argument("collective_write: view covers " + std::to_string(view.bytes()) +
                                " bytes but local buffer has " + std::to_string(local.size()));
  }
  ++stats_.file_calls;
  if (!local.empty()) ++stats_.file_data_calls;

  std::vector<Bytes> out;
  out.push_back(encode_view(view));
  enter("collective_write(" + path + ")", std::move(out));
  std::string overlap;
  if (debug_checks_) {
    std::vector<std::vector<Extent>> views;
    for (int r = 0; r < size(); ++r) views.push_back(decode_view(slot_out(r).front()));
    overlap = find_overlap(views);
  }
  leave();
  if (!overlap.empty()) throw IoError("collective_write(" + path + "): " + overlap);

  std::string failure;
  if (!local.empty()) {
    Fd f;
    f.fd = ::open(path.c_str(), O_WRONLY | O_CREAT, 0644);
    if (f.fd < 0) {
      failure = errno_message("cannot open for writing", path);
    } else {
      std::size_t pos = 0;
      for (const auto& e : view.extents) {
        std::uint64_t done = 0;
        while (done < e.length && failure.empty()) {
          const ssize_t w = ::pwrite(f.fd, local.data() + pos + done, e.length - done,
                                     static_cast<off_t>(e.offset + done));
          if (w < 0) {
            if (errno == EINTR) continue;
            failure = errno_message("write failed on", path);
          } else {
            done += static_cast<std::uint64_t>(w);
          }
        }
        pos += e.length;
      }
    }
  }

  // Publish per-rank status so that every rank fails together.
  auto statuses = allgather(string_bytes(failure));
  --stats_.collectives;  // status exchange is part of the same logical call
  for (int r = 0; r < size(); ++r) {
    auto msg = bytes_string(statuses[static_cast<std::size_t>(r)]);
    if (!msg.empty()) throw IoError("rank " + std::to_string(r) + ": " + msg);
  }
}

Bytes RankCtx::collective_read(const std::string& path, const FileView& view) {
  ++stats_.file_calls;
  const std::uint64_t total = view.bytes();
  if (total > 0) ++stats_.file_data_calls;

  std::vector<Bytes> out;
  out.push_back(encode_view(view));
  enter("collective_read(" + path + ")", std::move(out));
  leave();

  Bytes data(total);
  std::string failure;
  if (total > 0) {
    Fd f;
    f.fd = ::open(path.c_str(), O_RDONLY);
    if (f.fd < 0) {
      failure = errno_message("cannot open for reading", path);
    } else {
      std::size_t pos = 0;
      for (const auto& e : view.extents) {
        std::uint64_t done = 0;
        while (done < e.length && failure.empty()) {
          const ssize_t got = ::pread(f.fd, data.data() + pos + done, e.length - done,
                                      static_cast<off_t>(e.offset + done));
          if (got < 0) {
            if (errno == EINTR) continue;
            failure = errno_message("read failed on", path);
          } else if (got == 0) {
            failure = "unexpected end of file in '" + path + "' at offset " +
                      std::to_string(e.offset + done);
          } else {
            done += static_cast<std::uint64_t>(got);
          }
        }
        pos += e.length;
      }
    }
  }
  auto statuses = allgather(string_bytes(failure));
  --stats_.collectives;
  for (int r = 0; r < size(); ++r) {
    auto msg = bytes_string(statuses[static_cast<std::size_t>(r)]);
    if (!msg.empty()) throw IoError("rank " + std::to_string(r) + ": " + msg);
  }
  return data;
}

std::vector<std::exception_ptr> launch(int nranks, const std::function<void(RankCtx&)>& program,
                                       const SpawnOptions& opts) {
  if (nranks < 1) throw std::invalid_argument("spawn needs at least one rank");
  // Validate the grid before any rank starts.
  (void)make_grid(nranks, 0, opts.grid_rows);

  World world(nranks, opts.timeout);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nranks));

  std::mutex gate_mu;
  std::condition_variable gate_cv;
  bool go = false;
  bool cancelled = false;

  auto body = [&](int r) {
    {
      std::unique_lock lk(gate_mu);
      gate_cv.wait(lk, [&] { return go || cancelled; });
      if (cancelled) return;
    }
    try {
      RankCtx ctx(world, r, make_grid(nranks, r, opts.grid_rows), opts.debug_checks);
      program(ctx);
      world.finish();
    } catch (...) {
      errors[static_cast<std::size_t>(r)] = std::current_exception();
      std::string reason = "rank " + std::to_string(r) + " failed";
      try {
        throw;
      } catch (const std::exception& e) {
        reason += ": ";
        reason += e.what();
      } catch (...) {
      }
      world.abort(reason);
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(nranks));
  try {
    for (int r = 0; r < nranks; ++r) threads.emplace_back(body, r);
  } catch (...) {
    {
      std::lock_guard lk(gate_mu);
      cancelled = true;
    }
    gate_cv.notify_all();
    for (auto& t : threads) t.join();
    throw CollectiveError("spawn failed: could not start " + std::to_string(nranks) + " ranks");
  }
  {
    std::lock_guard lk(gate_mu);
    go = true;
  }
  gate_cv.notify_all();
  for (auto& t : threads) t.join();
  return errors;
}

std::vector<int> spawn(int nranks, const std::function<void(RankCtx&)>& program,
                       const SpawnOptions& opts) {
  auto errors = launch(nranks, program, opts);
  std::vector<int> status;
  status.reserve(errors.size());
  for (const auto& e : errors) status.push_back(e ? 1 : 0);
  return status;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  std::exception_ptr fallback;
  for (const auto& e : errors) {
    if (!e) continue;
    if (!fallback) fallback = e;
    try {
      std::rethrow_exception(e);
    } catch (const RankAborted&) {
      continue;
    } catch (...) {
      throw;
    }
  }
  if (fallback) std::rethrow_exception(fallback);
}

}  // namespace wallresp::comm
