#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <string>

#include "wallresp/error.hpp"
#include "wallresp/linalg.hpp"

namespace wallresp {

namespace dense {

GeneralizedEig generalized_eig(const Dense& a_in, const Dense& b) {
  const Index n = a_in.rows();
  Dense l = b;
  if (auto bad = cholesky_lower(l)) {
    throw NotPositiveDefinite("eigensolver: B is not positive definite (leading minor " +
                                  std::to_string(*bad + 1) + ")",
                              *bad + 1);
  }
  const Dense a = 0.5 * (a_in + a_in.transpose());
  const auto lt = l.triangularView<Eigen::Lower>();
  Dense c = lt.solve(a);
  c = lt.solve(c.transpose()).eval();
  c = (0.5 * (c + c.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<Dense> es(c);
  if (es.info() != Eigen::Success) {
    throw Error("eigensolver: standard eigenproblem of order " + std::to_string(n) +
                " did not converge");
  }
  GeneralizedEig out;
  out.gamma = es.eigenvalues();
  out.s = l.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
  return out;
}

}  // namespace dense

namespace {

// Verified in debug builds: relative residual and B-orthonormality.
constexpr double kResidualBound = 1e-9;
constexpr double kOrthoBound = 1e-10;

std::string check_result(const Dense& a, const Dense& b, const dense::GeneralizedEig& r) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff() *
                                                                    r.gamma.cwiseAbs().maxCoeff());
  const Dense res = a * r.s - b * r.s * r.gamma.asDiagonal();
  const double rn = res.cwiseAbs().maxCoeff() / (scale * std::max<double>(1.0, r.s.cwiseAbs().maxCoeff()));
  if (rn > kResidualBound) return "eigensolver: residual " + std::to_string(rn) + " above bound";
  const Dense g = r.s.transpose() * b * r.s - Dense::Identity(a.rows(), a.rows());
  const double on = g.cwiseAbs().maxCoeff();
  if (on > kOrthoBound * std::max<double>(1.0, static_cast<double>(a.rows()))) {
    return "eigensolver: B-orthonormality error " + std::to_string(on) + " above bound";
  }
  return {};
}

}  // namespace

EigResult generalized_eig(comm::RankCtx& ctx, const BlockCyclicMatrix& a,
                          const BlockCyclicMatrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw DimensionMismatch("generalized_eig: A is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + ", B is " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
  }
  const Index n = a.rows();
  constexpr Index no_cap = std::numeric_limits<Index>::max();
  auto fa = gather_to_root(ctx, a, no_cap);
  auto fb = gather_to_root(ctx, b, no_cap);

  // Root broadcasts [status, pivot, gamma...]; status 0 ok, 1 not SPD, 2 other.
  std::vector<double> head;
  std::string message;
  Dense s_full;
  if (ctx.is_root()) {
    try {
      auto r = dense::generalized_eig(*fa, *fb);
      if (ctx.debug_checks()) {
        message = check_result(*fa, *fb, r);
      }
      if (message.empty()) {
        head = {0.0, 0.0};
        head.insert(head.end(), r.gamma.data(), r.gamma.data() + r.gamma.size());
        s_full = std::move(r.s);
      } else {
        head = {2.0, 0.0};
      }
    } catch (const NotPositiveDefinite& e) {
      head = {1.0, static_cast<double>(e.pivot())};
      message = e.what();
    } catch (const std::exception& e) {
      head = {2.0, 0.0};
      message = e.what();
    }
  }
  head = comm::from_bytes<double>(ctx.broadcast(0, comm::to_bytes(head)));
  message = comm::bytes_string(ctx.broadcast(0, comm::string_bytes(message)));
  if (head.at(0) == 1.0) throw NotPositiveDefinite(message, static_cast<Index>(head.at(1)));
  if (head.at(0) != 0.0) throw Error(message);

  EigResult out;
  out.gamma.assign(head.begin() + 2, head.end());
  if (static_cast<Index>(out.gamma.size()) != n) {
    throw Error("eigensolver: expected " + std::to_string(n) + " eigenvalues");
  }
  out.s = scatter_from_root(ctx, s_full, a.desc());
  return out;
}

}  // namespace wallresp
