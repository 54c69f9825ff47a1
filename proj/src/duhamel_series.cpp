#include "nlpert/duhamel_series.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nlpert/fft.hpp"
#include "nlpert/parallel.hpp"
#include "nlpert/stable_kernels.hpp"

namespace nlpert {

namespace {

constexpr double kPi = std::numbers::pi;
using cplx = std::complex<double>;

int wrap(int k, int n) {
    k %= n;
    return k < 0 ? k + n : k;
}

void require_one_dimensional(const ModelParams& params) {
    if (params.d != 1) throw std::invalid_argument("the series engine works in dimension 1");
}

void require_separable(const BFunction& b) {
    if (!b.is_separable()) {
        throw std::invalid_argument("the series engine needs a separable coefficient sum_k u_k(x) g_k(|z|)");
    }
}

// Everything the per-row Volterra step needs: symbols, semigroup factors, nodal u_k.
struct SpectralContext {
    SpaceTimeGrid grid;
    int n = 0;
    int nk = 0;
    std::vector<double> decay;                 // E_m[k] = exp(-tau_m |kappa_k|^alpha), (M+1) x nk
    std::vector<std::vector<double>> symbols;  // psi_term[k]
    std::vector<std::vector<double>> u_nodes;  // u_term[j]
    std::vector<bool> u_constant;

    SpectralContext(const BFunction& b, const ModelParams& params, const SpaceTimeGrid& g) : grid(g) {
        n = g.N;
        nk = n / 2 + 1;
        decay.resize(static_cast<std::size_t>(g.M + 1) * nk);
        for (int m = 0; m <= g.M; ++m) {
            for (int k = 0; k < nk; ++k) {
                decay[static_cast<std::size_t>(m) * nk + k] =
                    std::exp(-g.time(m) * std::pow(g.wavenumber(k), params.alpha));
            }
        }
        for (const SeparableTerm& t : b.terms()) {
            std::vector<double> psi(static_cast<std::size_t>(nk));
            for (int k = 0; k < nk; ++k) psi[static_cast<std::size_t>(k)] = radial_symbol(t.profile, params, g.wavenumber(k));
            symbols.push_back(std::move(psi));
            std::vector<double> u(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j) {
                const double xj = g.x(j);
                u[static_cast<std::size_t>(j)] = t.u_at(std::span<const double>(&xj, 1));
            }
            u_nodes.push_back(std::move(u));
            u_constant.push_back(t.constant_in_x());
        }
    }

    const double* E(int m) const { return decay.data() + static_cast<std::size_t>(m) * nk; }
};

struct Workspace {
    RealFFT fft;
    std::vector<double> tmp;
    std::vector<cplx> spectrum;
    std::vector<cplx> F;    // (M+1) x nk
    std::vector<cplx> acc;  // nk

    Workspace(int n, int M) : fft(n), tmp(static_cast<std::size_t>(n)), spectrum(static_cast<std::size_t>(n / 2 + 1)),
                              F(static_cast<std::size_t>(M + 1) * (n / 2 + 1)), acc(static_cast<std::size_t>(n / 2 + 1)) {}
};

// out(m) = sum_k psi_k * int_0^{tau_m} FFT[in(tau_m - s) u_k] e^{-s v} ds with the trapezoid rule,
// which is exact for the free evolution factor. `in` and `out` hold (M+1) x N nodal values.
void volterra_forward(const SpectralContext& ctx, Workspace& ws, const std::vector<double>& in, std::vector<double>& out) {
    const int n = ctx.n;
    const int nk = ctx.nk;
    const int M = ctx.grid.M;
    const double h = ctx.grid.h();
    std::fill(ws.F.begin(), ws.F.end(), cplx(0.0));
    for (int j = 0; j <= M; ++j) {
        const double* row = in.data() + static_cast<std::size_t>(j) * n;
        cplx* Fj = ws.F.data() + static_cast<std::size_t>(j) * nk;
        for (std::size_t t = 0; t < ctx.symbols.size(); ++t) {
            const auto& u = ctx.u_nodes[t];
            for (int y = 0; y < n; ++y) ws.tmp[static_cast<std::size_t>(y)] = row[y] * u[static_cast<std::size_t>(y)] * h;
            ws.fft.forward(ws.tmp, ws.spectrum);
            const auto& psi = ctx.symbols[t];
            for (int k = 0; k < nk; ++k) Fj[k] += psi[static_cast<std::size_t>(k)] * ws.spectrum[static_cast<std::size_t>(k)];
        }
    }
    const double dt = ctx.grid.dt();
    const double norm = 1.0 / (2.0 * ctx.grid.L);
    std::fill(out.begin(), out.begin() + n, 0.0);
    for (int m = 1; m <= M; ++m) {
        const double* Em = ctx.E(m);
        const cplx* F0 = ws.F.data();
        const cplx* Fm = ws.F.data() + static_cast<std::size_t>(m) * nk;
        for (int k = 0; k < nk; ++k) ws.acc[static_cast<std::size_t>(k)] = 0.5 * (Em[k] * F0[k] + Fm[k]);
        for (int j = 1; j < m; ++j) {
            const double* Ej = ctx.E(m - j);
            const cplx* Fj = ws.F.data() + static_cast<std::size_t>(j) * nk;
            for (int k = 0; k < nk; ++k) ws.acc[static_cast<std::size_t>(k)] += Ej[k] * Fj[k];
        }
        for (int k = 0; k < nk; ++k) ws.acc[static_cast<std::size_t>(k)] *= dt;
        ws.fft.inverse(ws.acc, ws.tmp);
        double* o = out.data() + static_cast<std::size_t>(m) * n;
        for (int y = 0; y < n; ++y) o[y] = ws.tmp[static_cast<std::size_t>(y)] * norm;
    }
}

// Nodal band-limited periodized p_0 at every grid time for row x_i.
void p0_row(const SpectralContext& ctx, Workspace& ws, int i, std::vector<double>& out) {
    const int n = ctx.n;
    const double norm = 1.0 / (2.0 * ctx.grid.L);
    for (int m = 0; m <= ctx.grid.M; ++m) {
        const double* Em = ctx.E(m);
        for (int k = 0; k < ctx.nk; ++k) ws.acc[static_cast<std::size_t>(k)] = Em[k];
        ws.fft.inverse(ws.acc, ws.tmp);
        double* o = out.data() + static_cast<std::size_t>(m) * n;
        for (int y = 0; y < n; ++y) o[wrap(y + i, n)] = ws.tmp[static_cast<std::size_t>(y)] * norm;
    }
}

std::vector<int> all_indices(int M) {
    std::vector<int> v(static_cast<std::size_t>(M + 1));
    for (int m = 0; m <= M; ++m) v[static_cast<std::size_t>(m)] = m;
    return v;
}

std::vector<int> resolve_rows(const SpaceTimeGrid& grid, bool ti, const std::vector<int>& requested) {
    if (ti) return {0};
    if (requested.empty()) {
        std::vector<int> r(static_cast<std::size_t>(grid.N));
        for (int i = 0; i < grid.N; ++i) r[static_cast<std::size_t>(i)] = i;
        return r;
    }
    std::vector<int> r = requested;
    for (int i : r) {
        if (i < 0 || i >= grid.N) throw std::invalid_argument("requested row outside the grid");
    }
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    return r;
}

double row_sup(const std::vector<double>& v, int n, int M) {
    double s = 0.0;
    for (std::size_t k = static_cast<std::size_t>(n); k < static_cast<std::size_t>(M + 1) * n; ++k) s = std::max(s, std::abs(v[k]));
    return s;
}

double row_mass_sup(const std::vector<double>& v, int n, int M, double h, double target) {
    double s = 0.0;
    for (int m = 1; m <= M; ++m) {
        double mass = 0.0;
        for (int y = 0; y < n; ++y) mass += v[static_cast<std::size_t>(m) * n + y];
        s = std::max(s, std::abs(mass * h - target));
    }
    return s;
}

// Field rows at all grid times for row i of a field holding every time index.
std::vector<double> gather_row(const KernelField& q, int i) {
    const int n = q.grid().N;
    const int M = q.grid().M;
    std::vector<double> out(static_cast<std::size_t>(M + 1) * n);
    for (int m = 0; m <= M; ++m) {
        const int slot = q.slot_of_index(m);
        if (slot < 0) throw std::invalid_argument("field must hold every grid time for this operation");
        for (int y = 0; y < n; ++y) out[static_cast<std::size_t>(m) * n + y] = q(slot, i, y);
    }
    return out;
}

void store_row(KernelField& f, int i, const std::vector<double>& rows, int n) {
    for (std::size_t s = 0; s < f.slots(); ++s) {
        const int m = f.time_indices()[s];
        for (int y = 0; y < n; ++y) f.ref(static_cast<int>(s), i, y) = rows[static_cast<std::size_t>(m) * n + y];
    }
}

std::vector<std::unique_ptr<Workspace>> make_workspaces(const SpaceTimeGrid& g) {
    std::vector<std::unique_ptr<Workspace>> ws;
    for (int w = 0; w < thread_count(); ++w) ws.push_back(std::make_unique<Workspace>(g.N, g.M));
    return ws;
}

}  // namespace

// ---------------------------------------------------------------------------

int SpaceTimeGrid::time_index(double t) const {
    const double pos = t / dt();
    const long m = std::lround(pos);
    if (m < 0 || m > M || std::abs(pos - static_cast<double>(m)) > 1e-9 * std::max(1.0, pos)) {
        std::ostringstream os;
        os << "time " << t << " is not on the grid (step " << dt() << ", horizon " << t_max << ")";
        throw std::invalid_argument(os.str());
    }
    return static_cast<int>(m);
}

int SpaceTimeGrid::node_index(double xv) const { return wrap(static_cast<int>(std::lround((xv + L) / h())), N); }

double SpaceTimeGrid::wavenumber(int k) const { return kPi * k / L; }

void SpaceTimeGrid::validate() const {
    if (!(L > 0.0)) throw std::invalid_argument("grid: L must be positive");
    if (N < 8 || N % 2) throw std::invalid_argument("grid: N must be even and >= 8");
    if (!(t_max > 0.0)) throw std::invalid_argument("grid: t_max must be positive");
    if (M < 1) throw std::invalid_argument("grid: M must be >= 1");
}

KernelField::KernelField(SpaceTimeGrid grid, ModelParams params, std::string b_id, int term_index,
                         bool translation_invariant, std::vector<int> time_indices, std::vector<int> rows)
    : grid_(grid), params_(params), b_id_(std::move(b_id)), term_index_(term_index), ti_(translation_invariant),
      times_(std::move(time_indices)), rows_(std::move(rows)) {
    grid_.validate();
    if (ti_) rows_ = {0};
    row_slot_.assign(static_cast<std::size_t>(grid_.N), -1);
    for (std::size_t r = 0; r < rows_.size(); ++r) row_slot_[static_cast<std::size_t>(rows_[r])] = static_cast<int>(r);
    values_.assign(times_.size() * rows_.size() * static_cast<std::size_t>(grid_.N), 0.0);
}

bool KernelField::has_row(int i) const { return ti_ || (i >= 0 && i < grid_.N && row_slot_[static_cast<std::size_t>(i)] >= 0); }

std::size_t KernelField::offset(int slot, int i, int j) const {
    const std::size_t n = static_cast<std::size_t>(grid_.N);
    if (ti_) return static_cast<std::size_t>(slot) * n + static_cast<std::size_t>(wrap(j - i, grid_.N));
    const int r = row_slot_[static_cast<std::size_t>(i)];
    if (r < 0) throw std::out_of_range("row not computed in this field");
    return (static_cast<std::size_t>(slot) * rows_.size() + static_cast<std::size_t>(r)) * n + static_cast<std::size_t>(j);
}

double KernelField::operator()(int slot, int i, int j) const { return values_[offset(slot, i, j)]; }
double& KernelField::ref(int slot, int i, int j) { return values_[offset(slot, i, j)]; }

std::vector<double> KernelField::row(int slot, int i) const {
    std::vector<double> r(static_cast<std::size_t>(grid_.N));
    for (int j = 0; j < grid_.N; ++j) r[static_cast<std::size_t>(j)] = (*this)(slot, i, j);
    return r;
}

int KernelField::slot_of_index(int m) const {
    const auto it = std::find(times_.begin(), times_.end(), m);
    return it == times_.end() ? -1 : static_cast<int>(it - times_.begin());
}

int KernelField::slot_of_time(double t) const {
    const int s = slot_of_index(grid_.time_index(t));
    if (s < 0) throw std::invalid_argument("time not stored in this field");
    return s;
}

double KernelField::sup_abs() const {
    double s = 0.0;
    for (double v : values_) s = std::max(s, std::abs(v));
    return s;
}

double KernelField::min_value() const {
    double s = std::numeric_limits<double>::infinity();
    for (double v : values_) s = std::min(s, v);
    return s;
}

// ---------------------------------------------------------------------------

std::vector<double> sb_p0_field(const BFunction& b, const ModelParams& params, double s, double y,
                                const std::vector<double>& z_nodes, const OperatorOptions& opts) {
    params.validate();
    if (!(s > 0.0)) throw std::invalid_argument("sb_p0_field: s must be positive");
    std::vector<double> out(z_nodes.size(), 0.0);
    if (b.is_zero()) return out;
    if (params.d == 1) {
        auto table = StableDensityTable::get(params.alpha);
        const auto f = [&](double z) { return table->p0(s, std::abs(z - y)); };
        for (std::size_t k = 0; k < z_nodes.size(); ++k) out[k] = apply_Sb_1d(b, params, f, z_nodes[k], opts);
        return out;
    }
    throw std::invalid_argument("sb_p0_field: use apply_Sb directly for d >= 2");
}

KernelField p0_field(const ModelParams& params, const SpaceTimeGrid& grid, const std::string& b_id,
                     bool translation_invariant, const std::vector<int>& rows) {
    params.validate();
    require_one_dimensional(params);
    grid.validate();
    const BFunction zero = BFunction::zero();
    const SpectralContext ctx(zero, params, grid);
    KernelField f(grid, params, b_id, 0, translation_invariant, all_indices(grid.M),
                  resolve_rows(grid, translation_invariant, rows));
    auto ws = make_workspaces(grid);
    const auto& rr = f.rows();
    parallel_for(rr.size(), [&](int w, std::size_t r) {
        std::vector<double> buf(static_cast<std::size_t>(grid.M + 1) * grid.N);
        p0_row(ctx, *ws[static_cast<std::size_t>(w)], rr[r], buf);
        store_row(f, rr[r], buf, grid.N);
    });
    return f;
}

KernelField picard_term(const BFunction& b, const ModelParams& params, const KernelField& previous) {
    params.validate();
    require_one_dimensional(params);
    require_separable(b);
    const SpaceTimeGrid& grid = previous.grid();
    const bool ti = previous.translation_invariant();
    if (ti && !b.translation_invariant()) throw std::invalid_argument("picard_term: x-dependent b needs a full field");
    const SpectralContext ctx(b, params, grid);
    const int next = previous.term_index() == KernelField::kSum ? KernelField::kSum : previous.term_index() + 1;
    KernelField out(grid, params, b.id(), next, ti, all_indices(grid.M), previous.rows());
    auto ws = make_workspaces(grid);
    const auto& rr = out.rows();
    parallel_for(rr.size(), [&](int w, std::size_t r) {
        const std::vector<double> in = gather_row(previous, rr[r]);
        std::vector<double> res(in.size(), 0.0);
        volterra_forward(ctx, *ws[static_cast<std::size_t>(w)], in, res);
        store_row(out, rr[r], res, grid.N);
    });
    return out;
}

double horizon_from_ratio(const ModelParams& params, double t_max, double ratio) {
    if (!(ratio > 0.0)) return std::numeric_limits<double>::infinity();
    return t_max * std::pow(0.5 / ratio, params.alpha / (params.alpha - params.beta));
}

SeriesResult sum_series(const BFunction& b, const ModelParams& params, const SpaceTimeGrid& grid,
                        const SeriesOptions& opts) {
    params.validate();
    require_one_dimensional(params);
    require_separable(b);
    grid.validate();
    if (opts.n_max < 0) throw std::invalid_argument("sum_series: n_max must be >= 0");
    const bool ti = b.translation_invariant();
    const std::vector<int> rows = resolve_rows(grid, ti, opts.rows);
    std::vector<int> slots;
    if (opts.keep_all_times) {
        slots = all_indices(grid.M);
    } else {
        for (double t : opts.record_times) slots.push_back(grid.time_index(t));
        std::sort(slots.begin(), slots.end());
        slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
    }
    const SpectralContext ctx(b, params, grid);

    SeriesResult result;
    result.sum = KernelField(grid, params, b.id(), KernelField::kSum, ti, slots, rows);
    for (int t : opts.keep_terms) {
        if (t >= 0 && t <= opts.n_max) result.terms.emplace(t, KernelField(grid, params, b.id(), t, ti, slots, rows));
    }

    const int n = grid.N;
    const int M = grid.M;
    const double h = grid.h();
    struct RowStats {
        std::vector<double> norms;
        std::vector<double> masses;
        double mass_defect = 0.0;
    };
    std::vector<RowStats> stats(rows.size());
    auto ws = make_workspaces(grid);

    parallel_for(rows.size(), [&](int w, std::size_t r) {
        Workspace& W = *ws[static_cast<std::size_t>(w)];
        const int i = rows[r];
        const std::size_t size = static_cast<std::size_t>(M + 1) * n;
        std::vector<double> prev(size), cur(size), sum(size);
        p0_row(ctx, W, i, prev);
        sum = prev;
        RowStats& st = stats[r];
        const double norm0 = row_sup(prev, n, M);
        st.norms.push_back(norm0);
        st.masses.push_back(row_mass_sup(prev, n, M, h, 1.0));
        if (auto it = result.terms.find(0); it != result.terms.end()) store_row(it->second, i, prev, n);
        if (!b.is_zero()) {
            int growing = 0;
            for (int term = 1; term <= opts.n_max; ++term) {
                volterra_forward(ctx, W, prev, cur);
                const double nt = row_sup(cur, n, M);
                st.norms.push_back(nt);
                st.masses.push_back(row_mass_sup(cur, n, M, h, 0.0));
                for (std::size_t k = 0; k < size; ++k) sum[k] += cur[k];
                if (auto it = result.terms.find(term); it != result.terms.end()) store_row(it->second, i, cur, n);
                const double prev_norm = st.norms[st.norms.size() - 2];
                growing = (prev_norm > 0.0 && nt >= opts.divergence_ratio * prev_norm) ? growing + 1 : 0;
                if (growing >= opts.divergence_run) {
                    const double ratio = nt / prev_norm;
                    const double horizon = horizon_from_ratio(params, grid.t_max, ratio);
                    std::ostringstream os;
                    os << "series terms stopped decaying at term " << term << " (ratio " << ratio << " at t_max="
                       << grid.t_max << ", ||b||=" << b.sup_norm() << "); estimated convergence horizon " << horizon
                       << ", which scales like ||b||^{-alpha/(alpha-beta)} = ||b||^{"
                       << -params.alpha / (params.alpha - params.beta) << "}";
                    throw DivergenceError(os.str(), horizon);
                }
                std::swap(prev, cur);
                if (term >= opts.n_min && nt <= opts.tol * norm0) break;
            }
        }
        st.mass_defect = row_mass_sup(sum, n, M, h, 1.0);
        store_row(result.sum, i, sum, n);
    });

    SeriesReport& rep = result.report;
    std::size_t terms = 0;
    for (const auto& st : stats) terms = std::max(terms, st.norms.size());
    rep.term_norms.assign(terms, 0.0);
    rep.term_masses.assign(terms, 0.0);
    for (const auto& st : stats) {
        for (std::size_t k = 0; k < st.norms.size(); ++k) {
            rep.term_norms[k] = std::max(rep.term_norms[k], st.norms[k]);
            rep.term_masses[k] = std::max(rep.term_masses[k], st.masses[k]);
        }
        rep.mass_defect = std::max(rep.mass_defect, st.mass_defect);
    }
    rep.terms_used = static_cast<int>(terms) - 1;
    double worst_ratio = 0.0;
    for (std::size_t k = 1; k < terms; ++k) {
        const double r = rep.term_norms[k - 1] > 0.0 ? rep.term_norms[k] / rep.term_norms[k - 1] : 0.0;
        rep.term_ratios.push_back(r);
        if (k >= 2) worst_ratio = std::max(worst_ratio, r);
    }
    if (rep.term_ratios.size() == 1) worst_ratio = rep.term_ratios[0];
    for (std::size_t k = rep.term_ratios.size() >= 3 ? rep.term_ratios.size() - 3 : 0; k < rep.term_ratios.size(); ++k) {
        rep.ratio = std::max(rep.ratio, rep.term_ratios[k]);
    }
    const double last = rep.term_norms.empty() ? 0.0 : rep.term_norms.back();
    rep.truncation_bound = b.is_zero() ? 0.0
                           : rep.ratio < 1.0 ? last * rep.ratio / (1.0 - rep.ratio)
                                             : std::numeric_limits<double>::infinity();
    rep.horizon_estimate = horizon_from_ratio(params, grid.t_max, worst_ratio);
    rep.converged = b.is_zero() || (rep.ratio < 1.0 && last <= std::max(opts.tol, 1e-14) * rep.term_norms[0] * 10.0) ||
                    rep.truncation_bound <= 1e-8 * rep.term_norms[0];
    return result;
}

// ---------------------------------------------------------------------------

KernelField extend_time(const KernelField& q, double target_t, double s, double mass_tol) {
    if (!q.full()) throw std::invalid_argument("extend_time needs every row of the field");
    const SpaceTimeGrid& g = q.grid();
    const double dt = g.dt();
    const long target_index = std::lround(target_t / dt);
    if (std::abs(target_t / dt - static_cast<double>(target_index)) > 1e-9 * std::max(1.0, target_t / dt)) {
        throw std::invalid_argument("extend_time: target must be a multiple of the time step");
    }
    int is = -1;
    int ir = -1;
    if (s > 0.0) {
        is = q.slot_of_index(g.time_index(s));
        const double r = target_t - s;
        ir = r > 0.0 ? q.slot_of_index(g.time_index(r)) : -1;
    } else {
        for (int k = static_cast<int>(q.slots()) - 1; k >= 0 && is < 0; --k) {
            const int ms = q.time_indices()[static_cast<std::size_t>(k)];
            const long mr = target_index - ms;
            if (ms <= 0 || mr <= 0 || mr > g.M) continue;
            const int sr = q.slot_of_index(static_cast<int>(mr));
            if (sr >= 0) {
                is = k;
                ir = sr;
            }
        }
    }
    if (is < 0 || ir < 0) throw std::invalid_argument("extend_time: no split of the target into stored times");
    const int n = g.N;
    const double h = g.h();
    for (int slot : {is, ir}) {
        for (int i : q.rows()) {
            double mass = 0.0;
            for (int j = 0; j < n; ++j) mass += q(slot, i, j);
            if (std::abs(mass * h - 1.0) > mass_tol) {
                throw std::runtime_error("extend_time: factor mass defect exceeds tolerance; enlarge the domain");
            }
            if (q.translation_invariant()) break;
        }
    }
    SpaceTimeGrid eg = g;
    eg.M = static_cast<int>(target_index);
    eg.t_max = target_index * dt;
    KernelField out(eg, q.params(), q.b_id(), q.term_index(), q.translation_invariant(), {static_cast<int>(target_index)},
                    q.rows());
    const auto& rows = out.rows();
    parallel_for(rows.size(), [&](int, std::size_t r) {
        const int i = rows[r];
        std::vector<double> a = q.row(is, i);
        std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
        for (int z = 0; z < n; ++z) {
            const double w = a[static_cast<std::size_t>(z)] * h;
            if (w == 0.0) continue;
            for (int y = 0; y < n; ++y) acc[static_cast<std::size_t>(y)] += w * q(ir, z, y);
        }
        for (int y = 0; y < n; ++y) out.ref(0, i, y) = acc[static_cast<std::size_t>(y)];
    });
    return out;
}

double chapman_kolmogorov_residual(const KernelField& q, double t, double s) {
    if (!q.full()) throw std::invalid_argument("Chapman-Kolmogorov check needs every row of the field");
    const SpaceTimeGrid& g = q.grid();
    const int st = q.slot_of_time(t);
    const int ss = q.slot_of_time(s);
    const int sts = q.slot_of_time(t + s);
    const int n = g.N;
    const double h = g.h();
    const auto& rows = q.rows();
    std::vector<double> worst(rows.size(), 0.0);
    parallel_for(rows.size(), [&](int, std::size_t r) {
        const int i = rows[r];
        std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
        for (int z = 0; z < n; ++z) {
            const double w = q(st, i, z) * h;
            for (int y = 0; y < n; ++y) acc[static_cast<std::size_t>(y)] += w * q(ss, z, y);
        }
        double e = 0.0;
        for (int y = 0; y < n; ++y) e = std::max(e, std::abs(acc[static_cast<std::size_t>(y)] - q(sts, i, y)));
        worst[r] = e;
    });
    return *std::max_element(worst.begin(), worst.end());
}

ResidualFields duhamel_residuals(const KernelField& q, const BFunction& b, bool backward) {
    const ModelParams& params = q.params();
    require_one_dimensional(params);
    require_separable(b);
    const SpaceTimeGrid& g = q.grid();
    const int n = g.N;
    const int M = g.M;
    const SpectralContext ctx(b, params, g);
    const BFunction zero = BFunction::zero();
    const SpectralContext free_ctx(zero, params, g);
    auto ws = make_workspaces(g);
    const bool ti = q.translation_invariant();

    ResidualFields res;
    res.forward = KernelField(g, params, b.id(), q.term_index(), ti, all_indices(M), q.rows());
    const auto& rows = q.rows();
    std::vector<double> fsup(rows.size(), 0.0);
    parallel_for(rows.size(), [&](int w, std::size_t r) {
        Workspace& W = *ws[static_cast<std::size_t>(w)];
        const int i = rows[r];
        const std::vector<double> in = gather_row(q, i);
        std::vector<double> v(in.size()), p0(in.size());
        volterra_forward(ctx, W, in, v);
        p0_row(free_ctx, W, i, p0);
        for (std::size_t k = 0; k < in.size(); ++k) v[k] = in[k] - p0[k] - v[k];
        fsup[r] = row_sup(v, n, M);
        store_row(res.forward, i, v, n);
    });
    res.forward_sup = *std::max_element(fsup.begin(), fsup.end());
    if (!backward) return res;
    if (!q.full()) throw std::invalid_argument("backward Duhamel residual needs every row of the field");

    // Columns: W(s, z) = S^b_z q(s, z, y) applied spectrally along z, then convolved with p_0(t - s).
    const std::vector<int> columns = ti ? std::vector<int>{0} : all_indices(n - 1);
    res.backward = KernelField(g, params, b.id(), q.term_index(), ti, all_indices(M), ti ? std::vector<int>{0} : all_indices(n - 1));
    std::vector<double> bsup(columns.size(), 0.0);
    const double h = g.h();
    const double norm = 1.0 / (2.0 * g.L);
    parallel_for(columns.size(), [&](int w, std::size_t c) {
        Workspace& W = *ws[static_cast<std::size_t>(w)];
        const int y = columns[c];
        const int nk = ctx.nk;
        std::vector<double> col(static_cast<std::size_t>(M + 1) * n);
        for (int m = 0; m <= M; ++m) {
            const int slot = q.slot_of_index(m);
            for (int z = 0; z < n; ++z) col[static_cast<std::size_t>(m) * n + z] = q(slot, z, y);
        }
        std::fill(W.F.begin(), W.F.end(), cplx(0.0));
        std::vector<cplx> spec_col(static_cast<std::size_t>(nk));
        std::vector<double> applied(static_cast<std::size_t>(n));
        for (int m = 0; m <= M; ++m) {
            const double* cm = col.data() + static_cast<std::size_t>(m) * n;
            for (int z = 0; z < n; ++z) W.tmp[static_cast<std::size_t>(z)] = cm[z];
            W.fft.forward(W.tmp, spec_col);
            std::fill(applied.begin(), applied.end(), 0.0);
            for (std::size_t t = 0; t < ctx.symbols.size(); ++t) {
                for (int k = 0; k < nk; ++k) W.acc[static_cast<std::size_t>(k)] = ctx.symbols[t][static_cast<std::size_t>(k)] * spec_col[static_cast<std::size_t>(k)];
                W.fft.inverse(W.acc, W.tmp);
                for (int z = 0; z < n; ++z) applied[static_cast<std::size_t>(z)] += ctx.u_nodes[t][static_cast<std::size_t>(z)] * W.tmp[static_cast<std::size_t>(z)] / n;
            }
            for (int z = 0; z < n; ++z) W.tmp[static_cast<std::size_t>(z)] = applied[static_cast<std::size_t>(z)] * h;
            W.fft.forward(W.tmp, W.spectrum);
            std::copy(W.spectrum.begin(), W.spectrum.end(), W.F.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(m) * nk));
        }
        std::vector<double> out(static_cast<std::size_t>(M + 1) * n, 0.0);
        for (int m = 1; m <= M; ++m) {
            const double* Em = ctx.E(m);
            const cplx* F0 = W.F.data();
            const cplx* Fm = W.F.data() + static_cast<std::size_t>(m) * nk;
            for (int k = 0; k < nk; ++k) W.acc[static_cast<std::size_t>(k)] = 0.5 * (Em[k] * F0[k] + Fm[k]);
            for (int j = 1; j < m; ++j) {
                const double* Ej = ctx.E(m - j);
                const cplx* Fj = W.F.data() + static_cast<std::size_t>(j) * nk;
                for (int k = 0; k < nk; ++k) W.acc[static_cast<std::size_t>(k)] += Ej[k] * Fj[k];
            }
            for (int k = 0; k < nk; ++k) W.acc[static_cast<std::size_t>(k)] *= g.dt();
            W.fft.inverse(W.acc, W.tmp);
            for (int z = 0; z < n; ++z) out[static_cast<std::size_t>(m) * n + z] = W.tmp[static_cast<std::size_t>(z)] * norm;
        }
        // p_0(t, x, y) as a function of x is the same band-limited kernel
        std::vector<double> p0(static_cast<std::size_t>(M + 1) * n);
        p0_row(free_ctx, W, y, p0);
        double worst = 0.0;
        for (int m = 0; m <= M; ++m) {
            for (int x = 0; x < n; ++x) {
                const std::size_t k = static_cast<std::size_t>(m) * n + x;
                const double v = col[k] - p0[k] - out[k];
                if (m > 0) worst = std::max(worst, std::abs(v));
                if (ti) res.backward.ref(m, 0, wrap(y - x, n)) = v;
                else res.backward.ref(m, x, y) = v;
            }
        }
        bsup[c] = worst;
    });
    res.backward_sup = *std::max_element(bsup.begin(), bsup.end());
    return res;
}

std::vector<double> semigroup_apply(const KernelField& q, const std::vector<double>& f_nodes, double t) {
    const SpaceTimeGrid& g = q.grid();
    if (static_cast<int>(f_nodes.size()) != g.N) throw std::invalid_argument("semigroup_apply: f must have N node values");
    const int slot = q.slot_of_time(t);
    std::vector<double> out(static_cast<std::size_t>(g.N), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < g.N; ++i) {
        if (!q.has_row(i)) continue;
        double acc = 0.0;
        for (int j = 0; j < g.N; ++j) acc += q(slot, i, j) * f_nodes[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc * g.h();
    }
    return out;
}

double generator_identity_check(const KernelField& q, const BFunction& b, const std::function<double(double)>& f,
                                double t, const OperatorOptions& opts) {
    const SpaceTimeGrid& g = q.grid();
    const ModelParams& params = q.params();
    require_one_dimensional(params);
    const int mt = g.time_index(t);
    std::vector<double> fn(static_cast<std::size_t>(g.N)), lf(static_cast<std::size_t>(g.N));
    for (int j = 0; j < g.N; ++j) fn[static_cast<std::size_t>(j)] = f(g.x(j));
    parallel_for(static_cast<std::size_t>(g.N), [&](int, std::size_t j) {
        const double xj = g.x(static_cast<int>(j));
        lf[j] = apply_frac_laplacian_1d(params.alpha, f, xj, opts) + apply_Sb_1d(b, params, f, xj, opts);
    });
    const std::vector<double> tf = semigroup_apply(q, fn, t);
    std::vector<double> integral(static_cast<std::size_t>(g.N), 0.0);
    for (int m = 0; m <= mt; ++m) {
        const double w = (m == 0 || m == mt) ? 0.5 * g.dt() : g.dt();
        const std::vector<double> ts = semigroup_apply(q, lf, g.time(m));
        for (int i = 0; i < g.N; ++i) integral[static_cast<std::size_t>(i)] += w * ts[static_cast<std::size_t>(i)];
    }
    double worst = 0.0;
    for (int i = 0; i < g.N; ++i) {
        if (!q.has_row(i)) continue;
        const auto k = static_cast<std::size_t>(i);
        worst = std::max(worst, std::abs(tf[k] - fn[k] - integral[k]));
    }
    return worst;
}

// ---------------------------------------------------------------------------

namespace {
constexpr int kExplicitImages = 50;

// sum_{|p| > P} |z + 2Lp|^{-mu} by the midpoint integral of each tail
double image_power_tail(double z, double L, double mu) {
    const double start = 2.0 * L * (kExplicitImages + 0.5);
    return (std::pow(start + z, 1.0 - mu) + std::pow(start - z, 1.0 - mu)) / (2.0 * L * (mu - 1.0));
}
}  // namespace

ImageCorrection::ImageCorrection(const BFunction& b, const ModelParams& params, const SpaceTimeGrid& grid)
    : params_(params), grid_(grid) {
    require_one_dimensional(params);
    require_separable(b);
    a_alpha_ = normalizing_constant(1, params.alpha);
    a_beta_ = normalizing_constant(1, params.beta);
    for (const SeparableTerm& t : b.terms()) {
        std::vector<double> u(static_cast<std::size_t>(grid.N));
        for (int j = 0; j < grid.N; ++j) {
            const double xj = grid.x(j);
            u[static_cast<std::size_t>(j)] = t.u_at(std::span<const double>(&xj, 1));
        }
        u_nodes_.push_back(std::move(u));
        profiles_.push_back(t.profile);
        for (const PowerPiece& piece : t.profile.pieces()) {
            if (!std::isinf(piece.outer) || piece.coeff == 0.0) continue;
            const double gamma = params.beta - piece.exponent;
            tail_powers_.push_back({u_nodes_.size() - 1, a_beta_ * piece.coeff / normalizing_constant(1, gamma), gamma});
        }
    }
    for (std::size_t a = 0; a < tail_powers_.size(); ++a) {
        for (std::size_t c = 0; c < tail_powers_.size(); ++c) {
            const double expo = tail_powers_[a].gamma + tail_powers_[c].gamma;
            if (expo >= 2.0) continue;
            tail_pairs_.push_back({a, c, expo, tail_powers_[a].kappa * tail_powers_[c].kappa * normalizing_constant(1, expo)});
        }
    }
    table_ = StableDensityTable::get(params.alpha);
}

double ImageCorrection::second_order_images(double t, int i, double z) const {
    // (t psi)^2 / 2 ~ (t^2/2) sum kappa kappa' |xi|^s and |xi|^s has tail -A(1,-s)|w|^{-1-s} for s < 2
    double s = 0.0;
    for (const TailPair& pr : tail_pairs_) {
        const double u = u_nodes_[tail_powers_[pr.first].term][static_cast<std::size_t>(i)] *
                         u_nodes_[tail_powers_[pr.second].term][static_cast<std::size_t>(i)];
        if (u == 0.0) continue;
        double images = image_power_tail(z, grid_.L, 1.0 + pr.exponent);
        for (int p = 1; p <= kExplicitImages; ++p) {
            images += std::pow(std::abs(z + 2.0 * grid_.L * p), -1.0 - pr.exponent) +
                      std::pow(std::abs(z - 2.0 * grid_.L * p), -1.0 - pr.exponent);
        }
        s -= u * pr.weight * images;
    }
    return 0.5 * t * t * s;
}

double ImageCorrection::p0_images(double t, double z) const {
    double s = 0.0;
    for (int p = 1; p <= kExplicitImages; ++p) {
        s += table_->p0(t, std::abs(z + 2.0 * grid_.L * p)) + table_->p0(t, std::abs(z - 2.0 * grid_.L * p));
    }
    return s + t * a_alpha_ * image_power_tail(z, grid_.L, 1.0 + params_.alpha);
}

double ImageCorrection::beta_images(int i, double z) const {
    double total = 0.0;
    for (std::size_t k = 0; k < profiles_.size(); ++k) {
        const double u = u_nodes_[k][static_cast<std::size_t>(i)];
        if (u == 0.0) continue;
        const RadialProfile& g = profiles_[k];
        double s = 0.0;
        for (int p = 1; p <= kExplicitImages; ++p) {
            for (double w : {std::abs(z + 2.0 * grid_.L * p), std::abs(z - 2.0 * grid_.L * p)}) {
                s += g(w) * std::pow(w, -1.0 - params_.beta);
            }
        }
        for (const PowerPiece& piece : g.pieces()) {
            if (std::isinf(piece.outer)) {
                s += piece.coeff * image_power_tail(z, grid_.L, 1.0 + params_.beta - piece.exponent);
            }
        }
        total += u * s;
    }
    return a_beta_ * total;
}

double ImageCorrection::at_offset(double t, int i, double z, int term) const {
    double c = 0.0;
    if (term == KernelField::kSum || term == 0) c += p0_images(t, z);
    if (term == KernelField::kSum || term == 1) c += t * beta_images(i, z);
    if (term == KernelField::kSum || term == 2) c += second_order_images(t, i, z);
    return c;
}

double ImageCorrection::operator()(double t, int i, int j, int term) const {
    int off = wrap(j - i, grid_.N);
    if (off > grid_.N / 2) off -= grid_.N;
    return at_offset(t, i, off * grid_.h(), term);
}

double line_value(const KernelField& q, const ImageCorrection& images, int slot, int i, int j) {
    return q(slot, i, j) - images(q.time_of_slot(slot), i, j, q.term_index());
}

std::vector<double> row_bin_integrals(const KernelField& q, const ImageCorrection* images, int slot, int i,
                                      const std::vector<double>& edges) {
    const SpaceTimeGrid& g = q.grid();
    const int n = g.N;
    if (edges.size() < 2) throw std::invalid_argument("row_bin_integrals: need at least two edges");
    RealFFT fft(n);
    const std::vector<double> row = q.row(slot, i);
    std::vector<cplx> c(static_cast<std::size_t>(n / 2 + 1));
    fft.forward(row, c);
    const double y0 = g.x(0);
    // antiderivative of the trigonometric interpolant
    const auto prim = [&](double y) {
        double s = c[0].real() * (y - y0);
        for (int k = 1; k < n / 2; ++k) {
            const double kap = g.wavenumber(k);
            const cplx e = std::polar(1.0, kap * (y - y0));
            s += 2.0 * (c[static_cast<std::size_t>(k)] * e / cplx(0.0, kap)).real();
        }
        const double kn = g.wavenumber(n / 2);
        s += c[static_cast<std::size_t>(n / 2)].real() * std::sin(kn * (y - y0)) / kn;
        return s / n;
    };
    const double xi = g.x(i);
    const double t = q.time_of_slot(slot);
    std::vector<double> out(edges.size() - 1);
    double left = prim(edges[0]);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double right = prim(edges[k + 1]);
        double v = right - left;
        left = right;
        if (images) {
            const double a = edges[k] - xi;
            const double b = edges[k + 1] - xi;
            if (std::abs(a) > g.L || std::abs(b) > g.L) throw std::invalid_argument("bins must lie within x +- L");
            const int pieces = 4;
            const double hh = (b - a) / pieces;
            double s = 0.0;
            for (int p = 0; p <= pieces; ++p) {
                const double wgt = (p == 0 || p == pieces) ? 1.0 : (p % 2 ? 4.0 : 2.0);
                s += wgt * images->at_offset(t, i, a + p * hh, q.term_index());
            }
            v -= s * hh / 3.0;
        }
        out[k] = v;
    }
    return out;
}

double scaling_equivalence_check(const BFunction& b, const ModelParams& params, double lambda,
                                 const SpaceTimeGrid& grid, const SeriesOptions& opts) {
    if (!(lambda > 0.0)) throw std::invalid_argument("scaling check: lambda must be positive");
    if (lambda == 1.0) return 0.0;
    SeriesOptions o = opts;
    o.keep_all_times = true;
    o.keep_terms.clear();
    const SeriesResult lhs = sum_series(b, params, grid, o);
    const BFunction scaled = scale_b(b, params, lambda);
    SpaceTimeGrid g2 = grid;
    g2.L = std::pow(lambda, 1.0 / params.alpha) * grid.L;
    g2.t_max = lambda * grid.t_max;
    g2.M = 2 * grid.M;
    const SeriesResult rhs = sum_series(scaled, params, g2, o);
    const double factor = std::pow(lambda, 1.0 / params.alpha);
    double worst = 0.0;
    double sup = 0.0;
    for (int m = 1; m <= grid.M; ++m) {
        const int sl = lhs.sum.slot_of_index(m);
        const int sr = rhs.sum.slot_of_index(2 * m);
        for (int i : lhs.sum.rows()) {
            for (int j = 0; j < grid.N; ++j) {
                const double a = lhs.sum(sl, i, j);
                sup = std::max(sup, std::abs(a));
                worst = std::max(worst, std::abs(a - factor * rhs.sum(sr, i, j)));
            }
        }
    }
    return sup > 0.0 ? worst / sup : worst;
}

EnvelopeReport envelope_report(const KernelField& q, const BFunction& b, double lambda, double t_min,
                               double t_max_used, double radius) {
    const ModelParams& params = q.params();
    const SpaceTimeGrid& g = q.grid();
    EnvelopeReport rep;
    rep.tails = tail_stats(b, params, lambda);
    const KernelField p0 = p0_field(params, g, "constant:0", true);
    const ImageCorrection images(b, params, g);
    const ImageCorrection free_images(BFunction::zero(), params, g);
    rep.sup_ratio_upper = 0.0;
    rep.inf_ratio_lower = std::numeric_limits<double>::infinity();
    rep.sup_ratio_p0 = 0.0;
    rep.inf_ratio_p0 = std::numeric_limits<double>::infinity();
    rep.near_diagonal_inf = std::numeric_limits<double>::infinity();
    std::vector<int> slots;
    for (std::size_t s = 0; s < q.slots(); ++s) {
        const double t = q.time_of_slot(static_cast<int>(s));
        if (t >= t_min - 1e-12 && t <= t_max_used + 1e-12 && t > 0.0) slots.push_back(static_cast<int>(s));
    }
    if (slots.empty()) throw std::invalid_argument("envelope_report: no stored times in range");
    // p_a comparisons on at most 16 times and 17 offsets
    std::vector<int> sparse;
    const std::size_t stride = std::max<std::size_t>(1, slots.size() / 16);
    for (std::size_t k = 0; k < slots.size(); k += stride) sparse.push_back(slots[k]);
    if (sparse.back() != slots.back()) sparse.push_back(slots.back());
    std::vector<int> rows;
    for (std::size_t k = 0; k < q.rows().size(); k += q.translation_invariant() ? 1 : 8) rows.push_back(q.rows()[k]);
    const int max_off = std::min(g.N / 2, static_cast<int>(std::floor(radius / g.h() + 1e-9)));
    const int pa_stride = std::max(1, max_off / 16);
    const double a_up = rep.tails.M_plus;
    const double a_lo = rep.tails.m_plus;
    for (int slot : slots) {
        const double t = q.time_of_slot(slot);
        const int m = q.time_indices()[static_cast<std::size_t>(slot)];
        const int p0_slot = p0.slot_of_index(m);
        const bool with_pa = std::find(sparse.begin(), sparse.end(), slot) != sparse.end();
        std::vector<double> pa_up(static_cast<std::size_t>(max_off) + 1), pa_lo(pa_up.size());
        if (with_pa) {
            for (int off = 0; off <= max_off; off += pa_stride) {
                pa_up[static_cast<std::size_t>(off)] = eval_pa(params, a_up, t, off * g.h());
                pa_lo[static_cast<std::size_t>(off)] = eval_pa(params, a_lo, t, off * g.h());
            }
        }
        const double near = 3.0 * std::pow(t, 1.0 / params.alpha);
        for (int i : rows) {
            for (int off = -max_off; off <= max_off; ++off) {
                const int j = wrap(i + off, g.N);
                const double qv = line_value(q, images, slot, i, j);
                const double pv = p0(p0_slot, i, j) - free_images(t, i, j, 0);
                const double ratio = qv / pv;
                rep.sup_ratio_p0 = std::max(rep.sup_ratio_p0, ratio);
                rep.inf_ratio_p0 = std::min(rep.inf_ratio_p0, ratio);
                if (std::abs(off) * g.h() <= near + 1e-12) rep.near_diagonal_inf = std::min(rep.near_diagonal_inf, ratio);
                if (with_pa && std::abs(off) % pa_stride == 0) {
                    const auto k = static_cast<std::size_t>(std::abs(off));
                    rep.sup_ratio_upper = std::max(rep.sup_ratio_upper, qv / pa_up[k]);
                    rep.inf_ratio_lower = std::min(rep.inf_ratio_lower, qv / pa_lo[k]);
                }
            }
        }
    }
    return rep;
}

}  // namespace nlpert
