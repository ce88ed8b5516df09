#include "tractlab/model_dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tractlab {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

std::vector<long> parse_list(const std::string& s) {
    std::vector<long> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stol(item));
    return out;
}

std::vector<double> parse_reals(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

std::vector<cplx> box_boundary(const Box& b, int m) {
    std::vector<cplx> pts;
    pts.reserve(4 * m);
    for (int i = 0; i < m; ++i) {
        const double s = static_cast<double>(i) / m;
        pts.emplace_back(b.x0 + s * (b.x1 - b.x0), b.y0);
        pts.emplace_back(b.x1, b.y0 + s * (b.y1 - b.y0));
        pts.emplace_back(b.x1 - s * (b.x1 - b.x0), b.y1);
        pts.emplace_back(b.x0, b.y1 - s * (b.y1 - b.y0));
    }
    return pts;
}

// Depth palette; deeper levels are darker.
std::array<std::uint8_t, 3> colour(int depth) {
    static constexpr std::array<std::array<std::uint8_t, 3>, 6> base{{
        {{66, 133, 244}}, {{219, 68, 55}}, {{244, 180, 0}}, {{15, 157, 88}}, {{171, 71, 188}}, {{0, 172, 193}}}};
    auto c = base[static_cast<std::size_t>(depth) % base.size()];
    const double fade = std::max(0.35, 1.0 - 0.03 * depth);
    for (auto& v : c) v = static_cast<std::uint8_t>(v * fade);
    return c;
}

}  // namespace

long Address::operator[](std::size_t n) const {
    if (n < prefix.size()) return prefix[n];
    if (tail.empty()) return 0;
    return tail[(n - prefix.size()) % tail.size()];
}

long Address::max_abs(std::size_t upto) const {
    long m = 0;
    for (std::size_t n = 0; n < upto; ++n) m = std::max(m, std::abs((*this)[n]));
    return m;
}

Address Address::parse(const std::string& text) {
    Address a;
    const auto semi = text.find(';');
    a.prefix = parse_list(text.substr(0, semi));
    if (semi != std::string::npos) {
        a.tail = parse_list(text.substr(semi + 1));
        if (a.tail.empty()) a.tail = {0};
    }
    return a;
}

std::string Address::str() const {
    std::string out;
    for (std::size_t i = 0; i < prefix.size(); ++i) out += (i ? "," : "") + std::to_string(prefix[i]);
    out += ";";
    for (std::size_t i = 0; i < tail.size(); ++i) out += (i ? "," : "") + std::to_string(tail[i]);
    return out;
}

LogPolarPoint ext_forward(const MapKernel& k, cplx z, long s) {
    const cplx z0 = z - cplx(0.0, kTwoPi * static_cast<double>(s));
    if (!contains(k.spec(), z0)) throw DomainError("point outside the translated tract");
    return k.forward(z0);
}

cplx inverse_branch(const MapKernel& k, cplx w, long s) {
    return k.inverse(w) + cplx(0.0, kTwoPi * static_cast<double>(s));
}

bool Box::inside(const Box& o, double tol) const {
    return x0 >= o.x0 - tol && x1 <= o.x1 + tol && y0 >= o.y0 - tol && y1 <= o.y1 + tol;
}

nlohmann::json BoxCover::to_json() const {
    nlohmann::json j{{"depth", depth}, {"diam_max", diam_max}, {"core_diam_max", core_diam_max}};
    j["boxes"] = nlohmann::json::array();
    for (const auto& b : boxes) j["boxes"].push_back({{"x0", b.x0}, {"x1", b.x1}, {"y0", b.y0}, {"y1", b.y1}, {"depth", b.depth}});
    return j;
}

BoxCover continuum_cover(const MapKernel& k, const Address& s, int depth, const CoverOptions& opt) {
    if (depth < 0) throw std::invalid_argument("negative depth");
    if (s.max_abs(static_cast<std::size_t>(depth) + 1) > opt.s_max)
        throw std::invalid_argument("address entry exceeds |s|_max");
    const double inflate = 2.0 * k.eps_map();
    const double y_top = kTwoPi * static_cast<double>(s[static_cast<std::size_t>(depth)]);

    BoxCover cover;
    cover.depth = depth;
    const double dx = (opt.x_cut - 4.0) / opt.nx, dy = kTwoPi / opt.ny;
    for (int ix = 0; ix < opt.nx; ++ix)
        for (int iy = 0; iy < opt.ny; ++iy) {
            Box b{4.0 + ix * dx, 4.0 + (ix + 1) * dx, -kPi + iy * dy + y_top, -kPi + (iy + 1) * dy + y_top, depth};
            std::vector<cplx> pts = box_boundary(b, opt.side_samples);
            double pad = 0.0;
            for (int n = depth - 1; n >= 0; --n) {
                const long sn = s[static_cast<std::size_t>(n)];
                for (auto& p : pts) p = inverse_branch(k, p, sn);
                pad += inflate;
            }
            if (depth > 0) {
                b.x0 = b.x1 = pts[0].real();
                b.y0 = b.y1 = pts[0].imag();
                for (const auto& p : pts) {
                    b.x0 = std::min(b.x0, p.real());
                    b.x1 = std::max(b.x1, p.real());
                    b.y0 = std::min(b.y0, p.imag());
                    b.y1 = std::max(b.y1, p.imag());
                }
                cover.core_diam_max = std::max(cover.core_diam_max, b.diam());
                b.x0 -= pad;
                b.x1 += pad;
                b.y0 -= pad;
                b.y1 += pad;
            }
            if (depth == 0) cover.core_diam_max = std::max(cover.core_diam_max, b.diam());
            cover.diam_max = std::max(cover.diam_max, b.diam());
            cover.boxes.push_back(b);
        }
    return cover;
}

double cover_hausdorff(const BoxCover& a, const BoxCover& b) {
    auto corners = [](const BoxCover& c) {
        std::vector<cplx> pts;
        for (const auto& x : c.boxes) pts.insert(pts.end(), {{x.x0, x.y0}, {x.x1, x.y0}, {x.x0, x.y1}, {x.x1, x.y1}});
        return pts;
    };
    const auto pa = corners(a), pb = corners(b);
    auto directed = [](const std::vector<cplx>& p, const std::vector<cplx>& q) {
        double d = 0.0;
        for (const auto& x : p) {
            double best = INFINITY;
            for (const auto& y : q) best = std::min(best, std::abs(x - y));
            d = std::max(d, best);
        }
        return d;
    };
    if (pa.empty() || pb.empty()) return pa.empty() && pb.empty() ? 0.0 : INFINITY;
    return std::max(directed(pa, pb), directed(pb, pa));
}

Window Window::parse(const std::string& text) {
    const auto v = parse_reals(text);
    if (v.size() != 4 && v.size() != 6) throw std::invalid_argument("window needs x0,x1,y0,y1[,width,height]");
    Window w{v[0], v[1], v[2], v[3]};
    if (v.size() == 6) {
        w.width = static_cast<int>(v[4]);
        w.height = static_cast<int>(v[5]);
    }
    if (!(w.x1 > w.x0 && w.y1 > w.y0 && w.width > 0 && w.height > 0)) throw std::invalid_argument("empty window");
    return w;
}

std::vector<std::uint8_t> render(const std::vector<BoxCover>& covers, const Window& win) {
    const std::string header = "P6\n" + std::to_string(win.width) + " " + std::to_string(win.height) + "\n255\n";
    std::vector<std::uint8_t> img(header.begin(), header.end());
    const std::size_t off = img.size();
    img.resize(off + 3ull * win.width * win.height, 255);
    const double sx = win.width / (win.x1 - win.x0), sy = win.height / (win.y1 - win.y0);
    for (const auto& cover : covers)
        for (const auto& b : cover.boxes) {
            // pixel (i, j) covers [x0 + i/sx, x0 + (i+1)/sx); row 0 is the top
            const int i0 = std::max(0, static_cast<int>(std::floor((b.x0 - win.x0) * sx)));
            const int i1 = std::min(win.width - 1, static_cast<int>(std::floor((b.x1 - win.x0) * sx)));
            const int j0 = std::max(0, static_cast<int>(std::floor((win.y1 - b.y1) * sy)));
            const int j1 = std::min(win.height - 1, static_cast<int>(std::floor((win.y1 - b.y0) * sy)));
            const auto c = colour(b.depth);
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) {
                    auto* px = &img[off + 3ull * (static_cast<std::size_t>(j) * win.width + i)];
                    px[0] = c[0];
                    px[1] = c[1];
                    px[2] = c[2];
                }
        }
    return img;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace tractlab
