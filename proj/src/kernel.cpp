#include "fracperim/kernel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>

#include "fracperim/error.hpp"
#include "fracperim/parallel.hpp"

namespace fracperim {

static_assert(std::endian::native == std::endian::little, "table cache assumes a little-endian host");

void KernelParams::validate() const {
    if (!(s > 0.0 && s < 1.0)) throw Error(ErrorCode::InvalidParameter, "s must lie strictly inside (0,1)");
    if (dim < 1 || dim > 3) throw Error(ErrorCode::InvalidParameter, "kernel dimension must be 1, 2 or 3");
    if (near_field_order < 1) throw Error(ErrorCode::InvalidParameter, "near_field_order must be >= 1");
}

double unit_ball_volume(int n) {
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

double interval_pair_exact(double a, double b, double c, double d, double s) {
    if (!(a < b && b <= c && c < d) || !std::isfinite(a) || !std::isfinite(d))
        throw Error(ErrorCode::InvalidInterval, "expected finite a < b <= c < d");
    const double p = 1.0 - s;
    const double gap = c - b;
    const double touching = gap > 0.0 ? std::pow(gap, p) : 0.0;
    return (std::pow(d - b, p) - std::pow(d - a, p) - touching + std::pow(c - a, p)) / (s * p);
}

double interval_halfline_exact(double a, double b, double c, double s) {
    if (!(a < b && b <= c) || !std::isfinite(a) || !std::isfinite(c))
        throw Error(ErrorCode::InvalidInterval, "expected finite a < b <= c");
    const double p = 1.0 - s;
    const double gap = c - b;
    return (std::pow(c - a, p) - (gap > 0.0 ? std::pow(gap, p) : 0.0)) / (s * p);
}

double interval_interaction(double lo1, double hi1, double lo2, double hi2, double s) {
    if (!(lo1 < hi1) || !(lo2 < hi2)) throw Error(ErrorCode::InvalidInterval, "empty interval");
    if (lo2 < hi1 && lo1 < hi2) throw Error(ErrorCode::InvalidInterval, "intervals overlap");
    if (hi2 <= lo1) {
        std::swap(lo1, lo2);
        std::swap(hi1, hi2);
    }
    // now hi1 <= lo2
    const bool left_inf = std::isinf(lo1);
    const bool right_inf = std::isinf(hi2);
    if (left_inf && right_inf) return std::numeric_limits<double>::infinity();
    if (right_inf) return interval_halfline_exact(lo1, hi1, lo2, s);
    if (left_inf) return interval_halfline_exact(-hi2, -lo2, -hi1, s);
    return interval_pair_exact(lo1, hi1, lo2, hi2, s);
}

double tail_mass(double radius, const KernelParams& params) {
    if (!(radius > 0.0)) throw Error(ErrorCode::InvalidRadius, "tail radius must be positive");
    const int n = params.dim;
    return n * unit_ball_volume(n) / (params.s * std::pow(radius, params.s));
}

// ---------------------------------------------------------------------------

namespace {

int linf(const CellCoord& d, int dim) {
    int m = 0;
    for (int a = 0; a < dim; ++a) m = std::max(m, std::abs(d[a]));
    return m;
}

CellCoord canonical(const CellCoord& d, int dim) {
    CellCoord c{0, 0, 0};
    for (int a = 0; a < dim; ++a) c[a] = std::abs(d[a]);
    std::sort(c.begin(), c.begin() + dim, std::greater<>());
    return c;
}

/// Calls f(alpha, beta) for every pair of corner bits alpha, beta in {0,1}^dim.
template <class F>
void for_each_subpair(int dim, F&& f) {
    const int corners = 1 << dim;
    for (int alpha = 0; alpha < corners; ++alpha)
        for (int beta = 0; beta < corners; ++beta) f(alpha, beta);
}

CellCoord child_offset(const CellCoord& d, int alpha, int beta, int dim) {
    CellCoord out{0, 0, 0};
    for (int a = 0; a < dim; ++a) out[a] = 2 * d[a] + ((beta >> a) & 1) - ((alpha >> a) & 1);
    return out;
}

/// Weights of touching unit-cell pairs (|offset|_inf = 1) from the
/// self-similar closure; index m-1 holds the offset with m unit entries.
std::vector<double> touching_closure(int dim, double s) {
    const double scale = std::pow(2.0, -(dim - s));
    // (I - scale*A) T = b
    std::vector<std::vector<double>> mat(dim, std::vector<double>(dim, 0.0));
    std::vector<double> rhs(dim, 0.0);
    for (int m = 1; m <= dim; ++m) {
        CellCoord d{0, 0, 0};
        for (int a = 0; a < m; ++a) d[a] = 1;
        mat[m - 1][m - 1] += 1.0;
        for_each_subpair(dim, [&](int alpha, int beta) {
            const CellCoord child = child_offset(d, alpha, beta, dim);
            if (linf(child, dim) == 1) {
                const CellCoord key = canonical(child, dim);
                int ones = 0;
                for (int a = 0; a < dim; ++a) ones += key[a];
                mat[m - 1][ones - 1] -= scale;
            } else {
                rhs[m - 1] += scale * far_pair_weight(child, dim, s);
            }
        });
    }
    // Gaussian elimination with partial pivoting; dim <= 3.
    for (int col = 0; col < dim; ++col) {
        int piv = col;
        for (int r = col + 1; r < dim; ++r)
            if (std::abs(mat[r][col]) > std::abs(mat[piv][col])) piv = r;
        std::swap(mat[col], mat[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (int r = col + 1; r < dim; ++r) {
            const double f = mat[r][col] / mat[col][col];
            for (int c = col; c < dim; ++c) mat[r][c] -= f * mat[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> sol(dim, 0.0);
    for (int r = dim - 1; r >= 0; --r) {
        double acc = rhs[r];
        for (int c = r + 1; c < dim; ++c) acc -= mat[r][c] * sol[c];
        sol[r] = acc / mat[r][r];
    }
    return sol;
}

class NearFieldSolver {
public:
    NearFieldSolver(int dim, double s) : dim_(dim), s_(s), scale_(std::pow(2.0, -(dim - s))) {
        closure_ = touching_closure(dim, s);
    }

    double weight(const CellCoord& offset, int depth) {
        const CellCoord key = canonical(offset, dim_);
        const int reach = linf(key, dim_);
        if (reach >= 3) return far_pair_weight(key, dim_, s_);
        if (depth <= 0) {
            if (reach == 2) return far_pair_weight(key, dim_, s_);
            int ones = 0;
            for (int a = 0; a < dim_; ++a) ones += key[a];
            return closure_[ones - 1];
        }
        const auto memo_key = std::make_pair(key, depth);
        if (auto it = memo_.find(memo_key); it != memo_.end()) return it->second;
        CompensatedSum acc;
        for_each_subpair(dim_, [&](int alpha, int beta) {
            acc.add(scale_ * weight(child_offset(key, alpha, beta, dim_), depth - 1));
        });
        const double value = acc.value();
        memo_.emplace(memo_key, value);
        return value;
    }

private:
    int dim_;
    double s_;
    double scale_;
    std::vector<double> closure_;
    std::map<std::pair<CellCoord, int>, double> memo_;
};

}  // namespace

double far_pair_weight(const CellCoord& offset, int dim, double s) {
    const double expo = -(dim + s);
    double r2 = 0.0;
    for (int a = 0; a < dim; ++a) r2 += static_cast<double>(offset[a]) * offset[a];
    const double coarse = std::pow(r2, 0.5 * expo);
    CompensatedSum fine;
    for_each_subpair(dim, [&](int alpha, int beta) {
        double q2 = 0.0;
        for (int a = 0; a < dim; ++a) {
            const double x = offset[a] + 0.5 * (((beta >> a) & 1) - ((alpha >> a) & 1));
            q2 += x * x;
        }
        fine.add(std::pow(q2, 0.5 * expo));
    });
    const double refined = fine.value() / static_cast<double>(1 << (2 * dim));
    return (4.0 * refined - coarse) / 3.0;
}

double near_pair_weight(const CellCoord& offset, int dim, double s, int depth) {
    const int reach = linf(offset, dim);
    if (reach < 1 || reach > 2) throw Error(ErrorCode::InvalidArgument, "near-field offsets satisfy 1 <= |d|_inf <= 2");
    NearFieldSolver solver(dim, s);
    return solver.weight(offset, depth);
}

// ---------------------------------------------------------------------------

InteractionTable::InteractionTable(GridSpec spec, KernelParams params, int max_offset, std::vector<double> weights)
    : spec_(spec), params_(params), max_offset_(max_offset), weights_(std::move(weights)) {
    const long side = 2L * max_offset + 1;
    stride_[0] = 1;
    stride_[1] = spec.dim >= 2 ? side : 0;
    stride_[2] = spec.dim >= 3 ? side * side : 0;
    center_ = max_offset * (stride_[0] + stride_[1] + stride_[2]);
    std::size_t expected = 1;
    for (int a = 0; a < spec.dim; ++a) expected *= static_cast<std::size_t>(side);
    if (weights_.size() != expected) throw Error(ErrorCode::InvalidArgument, "weight array has the wrong size");
}

bool InteractionTable::compatible_with(const GridSpec& spec) const {
    if (spec.dim != spec_.dim || spec.h != spec_.h) return false;
    for (int a = 0; a < spec.dim; ++a)
        if (spec.extent[a] - 1 > max_offset_) return false;
    return true;
}

bool InteractionTable::covers(const CellCoord& offset) const {
    for (int a = 0; a < spec_.dim; ++a)
        if (std::abs(offset[a]) > max_offset_) return false;
    return true;
}

InteractionTable build_table(const GridSpec& spec, const KernelParams& params, int max_offset) {
    spec.validate();
    params.validate();
    if (params.dim != spec.dim) throw Error(ErrorCode::SpecMismatch, "kernel and grid dimensions differ");
    if (max_offset < spec.max_extent() - 1)
        throw Error(ErrorCode::InvalidArgument, "max_offset must cover the grid diameter");
    const int n = spec.dim;
    const double s = params.s;
    const int side = 2 * max_offset + 1;

    // canonical offsets in lexicographic order
    std::vector<CellCoord> keys;
    for (int a = 0; a <= max_offset; ++a)
        for (int b = 0; b <= (n >= 2 ? a : 0); ++b)
            for (int c = 0; c <= (n >= 3 ? b : 0); ++c)
                if (a > 0) keys.push_back({a, b, c});

    std::vector<double> unit(keys.size(), 0.0);
    // near-field evaluation memoizes across offsets; run it serially first
    NearFieldSolver near(n, s);
    for (std::size_t k = 0; k < keys.size(); ++k)
        if (n >= 2 && keys[k][0] <= 2) unit[k] = near.weight(keys[k], params.near_field_order);
    parallel_for(keys.size(), [&](std::size_t k) {
        const CellCoord& key = keys[k];
        if (n == 1) {
            unit[k] = interval_pair_exact(0.0, 1.0, key[0], key[0] + 1.0, s);
        } else if (key[0] >= 3) {
            unit[k] = far_pair_weight(key, n, s);
        }
    });
    std::map<CellCoord, double> by_key;
    for (std::size_t k = 0; k < keys.size(); ++k) by_key.emplace(keys[k], unit[k]);

    const double scale = std::pow(spec.h, n - s);
    std::size_t total = 1;
    for (int a = 0; a < n; ++a) total *= static_cast<std::size_t>(side);
    std::vector<double> weights(total, 0.0);
    for (std::size_t idx = 0; idx < total; ++idx) {
        CellCoord d{0, 0, 0};
        std::size_t rest = idx;
        for (int a = 0; a < n; ++a) {
            d[a] = static_cast<int>(rest % side) - max_offset;
            rest /= side;
        }
        if (linf(d, n) == 0) continue;
        weights[idx] = scale * by_key.at(canonical(d, n));
    }
    return InteractionTable(spec, params, max_offset, std::move(weights));
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'F', 'P', 'T', 'A', 'B', 'L', 'E', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw Error(ErrorCode::IoError, "truncated table cache");
    return value;
}

}  // namespace

void save_table(const InteractionTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(table.spec().dim));
    put(out, table.params().s);
    put(out, table.spec().h);
    put(out, static_cast<std::uint32_t>(table.max_offset()));
    put(out, static_cast<std::uint32_t>(table.params().near_field_order));
    for (int a = 0; a < 3; ++a) put(out, static_cast<std::uint32_t>(table.spec().extent[a]));
    for (int a = 0; a < 3; ++a) put(out, table.spec().origin[a]);
    out.write(reinterpret_cast<const char*>(table.data().data()),
              static_cast<std::streamsize>(table.data().size() * sizeof(double)));
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path);
}

InteractionTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error(ErrorCode::ParseError, "not a table cache");
    if (get<std::uint32_t>(in) != kVersion) throw Error(ErrorCode::ParseError, "unsupported table cache version");
    const int dim = static_cast<int>(get<std::uint32_t>(in));
    KernelParams params;
    params.dim = dim;
    params.s = get<double>(in);
    const double h = get<double>(in);
    const int max_offset = static_cast<int>(get<std::uint32_t>(in));
    params.near_field_order = static_cast<int>(get<std::uint32_t>(in));
    CellCoord extent{1, 1, 1};
    for (int a = 0; a < 3; ++a) extent[a] = static_cast<int>(get<std::uint32_t>(in));
    Point origin{0.0, 0.0, 0.0};
    for (int a = 0; a < 3; ++a) origin[a] = get<double>(in);
    params.validate();
    const GridSpec spec = GridSpec::make(dim, extent, h, origin);
    std::size_t total = 1;
    for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(2 * max_offset + 1);
    std::vector<double> weights(total);
    in.read(reinterpret_cast<char*>(weights.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw Error(ErrorCode::IoError, "truncated table cache");
    return InteractionTable(spec, params, max_offset, std::move(weights));
}

}  // namespace fracperim
