#pragma once

#include <vector>

#include "tractlab/tract.hpp"

namespace tractlab {

// Schwarz-Christoffel map from the strip {|Im u| < pi/2} onto the tract:
//
//   f'(u) = C exp(u/2) prod_k sinh((u - u_k)/2)^beta_k,
//
// with prevertices u_k = lambda_k +- i pi/2 on the two edges. u = +inf goes to
// the far end of the tract and u = -inf to a point of the left edge. The strip
// is the logarithm of the right half-plane, so lambda ranges of several hundred
// are harmless while the matching |F| would overflow.
struct Prevertex {
    double lambda = 0.0;
    int line = +1;       // +1: Im u = pi/2 (upper chain), -1: Im u = -pi/2
    double beta = 0.0;
    cplx vertex;         // image corner
    cplx u() const { return cplx(lambda, line * kPi / 2); }
};

class StripSC {
public:
    StripSC() = default;
    explicit StripSC(std::vector<Prevertex> pv);

    const std::vector<Prevertex>& prevertices() const { return pv_; }
    cplx log_c() const { return log_c_; }

    // log f'(u) on the branch that is continuous in the open strip.
    cplx log_dfdu(cplx u) const;
    // Same, with u = u_k + offset where the small offset is known exactly.
    cplx log_dfdu_at(std::size_t k, cplx offset) const;

    // log |f'(x + i line pi/2)|; if k >= 0 its distance |x - lambda_k| = dk is used verbatim.
    double log_abs_dfdu_on_line(double x, int line, long k = -1, double dk = 0.0) const;

    // Euclidean length of the image side between consecutive prevertices i < j on one line.
    double side_length(std::size_t i, std::size_t j, double tol = 1e-12) const;

    // Integral of f' along the segment a -> b. Either end may sit exactly on a
    // prevertex (ka / kb >= 0), in which case the singularity is removed by
    // substitution. Splits adaptively if an estimate looks poor.
    cplx integrate(cplx a, cplx b, long ka = -1, long kb = -1, double tol = 1e-13) const;

    long nearest_prevertex(cplx u, double* dist = nullptr) const;

private:
    cplx log_term(std::size_t k, cplx offset) const;
    cplx integrate_plain(cplx a, cplx b, double tol, int depth) const;

    std::vector<Prevertex> pv_;
    cplx log_c_{0.0, 0.0};
};

struct SolveReport {
    int iterations = 0;
    double max_residual = 0.0;  // max |log(L / L_target)| over sides
    bool converged = false;
    std::string message;
};

struct SolveOptions {
    double tol = 1e-12;
    int max_evals = 4000;
};

// Solve the parameter problem for the wiggle tract: the first prevertex of
// each chain is pinned at lambda = 0, remaining log-gaps are fitted to the
// side lengths.
StripSC solve_strip_sc(const TractBoundary& b, const SolveOptions& opt, SolveReport* report);

// Heuristic starting lambdas from corridor widths (exposed for tests).
std::vector<Prevertex> initial_prevertices(const TractBoundary& b);

}  // namespace tractlab
