#include "tractlab/tract.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tractlab {

namespace {

constexpr double kThird = kPi / 3.0;

std::string fmt_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

double seg_distance(cplx p, const Segment& s) {
    const cplx d = s.b - s.a;
    const double len2 = std::norm(d);
    double t = len2 > 0 ? ((p - s.a) * std::conj(d)).real() / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::abs(p - (s.a + t * d));
}

std::vector<Segment> slit_segments(const WiggleSpec& spec) {
    std::vector<Segment> out;
    for (std::size_t j = 0; j < spec.size(); ++j) {
        const double r = spec.r[j], R = spec.R[j];
        out.push_back({cplx(r, -kPi), cplx(r, kThird)});
        out.push_back({cplx(r, kThird), cplx(R - 1, kThird)});
        out.push_back({cplx(R, -kThird), cplx(R, kPi)});
        out.push_back({cplx(r + 1, -kThird), cplx(R, -kThird)});
    }
    return out;
}

}  // namespace

SpecCheck validate_spec(const WiggleSpec& spec) {
    SpecCheck c;
    auto fail = [&](std::string msg) {
        c.ok = false;
        c.violation = std::move(msg);
        return c;
    };
    if (spec.r.size() != spec.R.size()) return fail("r and R differ in length");
    for (std::size_t j = 0; j < spec.size(); ++j) {
        const std::string js = std::to_string(j);
        if (!std::isfinite(spec.r[j]) || !std::isfinite(spec.R[j])) return fail("non-finite entry at " + js);
        if (j == 0) {
            if (!(spec.r[0] > 6)) return fail("r[0] > 6");
        } else if (!(spec.r[j] > spec.R[j - 1] + 1)) {
            return fail("r[" + js + "] > R[" + std::to_string(j - 1) + "]+1");
        }
        if (!(spec.R[j] > spec.r[j] + 2)) return fail("R[" + js + "] > r[" + js + "]+2");
    }
    return c;
}

double default_xmax(const WiggleSpec& spec) { return spec.empty() ? 50.0 : spec.R.back() + 20.0; }

TractBoundary build_boundary(const WiggleSpec& spec, double xmax) {
    const auto chk = validate_spec(spec);
    if (!chk.ok) throw std::invalid_argument("invalid wiggle spec: " + chk.violation);
    const double need = spec.empty() ? 7.0 : spec.R.back() + 2.0;
    if (!(xmax > need)) throw std::invalid_argument("truncation inside last wiggle (xmax must exceed " + fmt_num(need) + ")");

    TractBoundary b;
    b.spec = spec;
    b.xmax = xmax;
    // Turning exponents: upper chain is walked with the domain on its right,
    // lower chain with the domain on its left; see the wiggle corner table.
    b.upper.push_back({cplx(4, kPi), -0.5, false});
    b.lower.push_back({cplx(4, -kPi), -0.5, false});
    for (std::size_t j = 0; j < spec.size(); ++j) {
        const double r = spec.r[j], R = spec.R[j];
        b.upper.push_back({cplx(R, kPi), -0.5, false});
        b.upper.push_back({cplx(R, -kThird), -0.5, false});
        b.upper.push_back({cplx(r + 1, -kThird), 1.0, true});
        b.upper.push_back({cplx(R, -kThird), 0.5, false});
        b.upper.push_back({cplx(R, kPi), -0.5, false});

        b.lower.push_back({cplx(r, -kPi), -0.5, false});
        b.lower.push_back({cplx(r, kThird), 0.5, false});
        b.lower.push_back({cplx(R - 1, kThird), 1.0, true});
        b.lower.push_back({cplx(r, kThird), -0.5, false});
        b.lower.push_back({cplx(r, -kPi), -0.5, false});

        b.tips.push_back(cplx(r, kThird));
        b.tips.push_back(cplx(R - 1, kThird));
        b.tips.push_back(cplx(R, -kThird));
        b.tips.push_back(cplx(r + 1, -kThird));
    }
    b.upper.push_back({cplx(xmax, kPi), 0.0, false});
    b.lower.push_back({cplx(xmax, -kPi), 0.0, false});
    b.slits = slit_segments(spec);
    return b;
}

double boundary_distance(const WiggleSpec& spec, cplx z) {
    double d = std::min({kPi - z.imag(), z.imag() + kPi, z.real() - 4.0});
    if (z.real() < 4.0) {
        // distance to the left edge segment
        d = std::min(d, seg_distance(z, {cplx(4, -kPi), cplx(4, kPi)}));
    }
    for (const auto& s : slit_segments(spec)) d = std::min(d, seg_distance(z, s));
    return d;
}

Membership classify(const WiggleSpec& spec, cplx z, double tol) {
    const double x = z.real(), y = z.imag();
    if (x < 4.0 - tol || std::abs(y) > kPi + tol) return Membership::outside;
    if (x <= 4.0 + tol || std::abs(y) >= kPi - tol) return Membership::boundary;
    for (const auto& s : slit_segments(spec))
        if (seg_distance(z, s) <= tol) return Membership::boundary;
    return Membership::inside;
}

bool in_wiggle_region(const WiggleSpec& spec, cplx z, long* which) {
    for (std::size_t j = 0; j < spec.size(); ++j) {
        if (z.real() > spec.r[j] && z.real() < spec.R[j] && z.imag() < kThird) {
            if (which) *which = static_cast<long>(j);
            return true;
        }
    }
    return false;
}

SpineCurve spine(const WiggleSpec& spec, double xmax) {
    SpineCurve s;
    s.points.push_back(cplx(5, 0));
    const double h = 2.0 * kPi / 3.0;
    for (std::size_t j = 0; j < spec.size(); ++j) {
        const double r = spec.r[j], R = spec.R[j];
        if (r - 0.5 > xmax) break;
        s.points.push_back(cplx(r - 0.5, 0));
        s.points.push_back(cplx(r - 0.5, h));
        s.points.push_back(cplx(R - 0.5, h));
        s.points.push_back(cplx(R - 0.5, 0));
        s.points.push_back(cplx(r + 0.5, 0));
        s.points.push_back(cplx(r + 0.5, -h));
        s.points.push_back(cplx(R + 0.5, -h));
        s.points.push_back(cplx(R + 0.5, 0));
    }
    if (s.points.back().real() < xmax) s.points.push_back(cplx(xmax, 0));
    return s;
}

double spine_length_to(const SpineCurve& s, double x) {
    double len = 0.0;
    if (x <= s.points.front().real()) return 0.0;
    for (std::size_t k = 1; k < s.points.size(); ++k) {
        const cplx a = s.points[k - 1], b = s.points[k];
        const double lo = std::min(a.real(), b.real()), hi = std::max(a.real(), b.real());
        if (x >= lo && x <= hi && hi > lo) {
            const double t = (x - a.real()) / (b.real() - a.real());
            return len + t * std::abs(b - a);
        }
        len += std::abs(b - a);
    }
    return len;
}

}  // namespace tractlab
