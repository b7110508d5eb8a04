#include "spingap/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "spingap/rng.hpp"

namespace spingap {

SpinWord insert_bit(SpinWord cfg, int pos, int sign) {
    SpinWord low = cfg & ((SpinWord{1} << pos) - 1u);
    SpinWord high = (cfg >> pos) << (pos + 1);
    SpinWord bit = (sign > 0 ? SpinWord{1} : SpinWord{0}) << pos;
    return high | bit | low;
}

SpinWord remove_bit(SpinWord cfg, int pos) {
    SpinWord low = cfg & ((SpinWord{1} << pos) - 1u);
    SpinWord high = (cfg >> (pos + 1)) << pos;
    return high | low;
}

void ModelSpec::validate() const {
    if (n_spins < 1) throw std::invalid_argument("ModelSpec: n_spins must be positive");
    if (n_spins > 30) throw std::invalid_argument("ModelSpec: n_spins beyond desk scale");
    int last_p = 1;
    for (const auto& term : mixing) {
        if (term.p < 2) throw std::invalid_argument("ModelSpec: mixing degree p must be >= 2");
        if (term.p <= last_p)
            throw std::invalid_argument("ModelSpec: mixing degrees must be strictly increasing");
        if (!(term.beta_p >= 0.0))
            throw std::invalid_argument("ModelSpec: beta_p must be nonnegative");
        last_p = term.p;
    }
    if (external_field.size() != static_cast<std::size_t>(n_spins))
        throw std::invalid_argument("ModelSpec: external_field must have exactly n_spins entries");
}

double ModelSpec::coupling_scale(int p) const {
    return std::pow(static_cast<double>(n_spins), -0.5 * (p - 1));
}

double beta_aggregate(const ModelSpec& spec) {
    double total = 0.0;
    for (const auto& term : spec.mixing) {
        double p = static_cast<double>(term.p);
        total += std::sqrt(p * p * p * std::log(p)) * term.beta_p;
    }
    return total;
}

double c_beta(double beta) {
    double x = 1e3 * beta;
    return x * x * std::exp(x);
}

double c_k_beta(double k_value, double beta) {
    double x = 20.0 * std::abs(k_value) * beta;
    return x * x * std::exp(x);
}

namespace {

std::size_t pow_size(int n, int p) {
    std::size_t r = 1;
    for (int i = 0; i < p; ++i) r *= static_cast<std::size_t>(n);
    return r;
}

bool tuple_has_repeat(std::uint64_t linear, int n, int p) {
    std::uint32_t seen = 0;
    for (int slot = 0; slot < p; ++slot) {
        std::uint32_t site = static_cast<std::uint32_t>(linear % n);
        linear /= static_cast<std::uint64_t>(n);
        if (seen & (1u << site)) return true;
        seen |= 1u << site;
    }
    return false;
}

}  // namespace

Disorder Disorder::sample(const ModelSpec& spec, std::size_t entry_cap) {
    spec.validate();
    Disorder d;
    d.n_ = spec.n_spins;

    std::size_t total = 0;
    for (const auto& term : spec.mixing) total += pow_size(spec.n_spins, term.p);
    if (total > entry_cap) {
        std::ostringstream msg;
        msg << "Disorder: requested " << total << " coupling entries exceeds cap " << entry_cap;
        throw std::length_error(msg.str());
    }

    for (const auto& term : spec.mixing) {
        std::size_t count = pow_size(spec.n_spins, term.p);
        std::vector<double> values(count);
        for (std::size_t t = 0; t < count; ++t) {
            values[t] = tuple_has_repeat(t, spec.n_spins, term.p)
                            ? 0.0
                            : gaussian_at(spec.seed, static_cast<std::uint64_t>(term.p), t);
        }
        d.arrays_.emplace_back(term.p, std::move(values));
    }
    return d;
}

Disorder sample_disorder(const ModelSpec& spec, std::size_t entry_cap) {
    return Disorder::sample(spec, entry_cap);
}

bool Disorder::has_p(int p) const {
    for (const auto& [q, _] : arrays_)
        if (q == p) return true;
    return false;
}

const std::vector<double>& Disorder::couplings(int p) const {
    for (const auto& [q, values] : arrays_)
        if (q == p) return values;
    throw std::invalid_argument("Disorder: no couplings for p=" + std::to_string(p));
}

double Disorder::coupling(int p, std::span<const int> tuple) const {
    if (static_cast<int>(tuple.size()) != p)
        throw std::invalid_argument("Disorder: tuple length must equal p");
    std::size_t idx = 0;
    for (int site : tuple) {
        if (site < 0 || site >= n_) throw std::out_of_range("Disorder: tuple site out of range");
        idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(site);
    }
    return couplings(p)[idx];
}

std::vector<int> Disorder::supported_p() const {
    std::vector<int> ps;
    for (const auto& [p, _] : arrays_) ps.push_back(p);
    return ps;
}

namespace {
constexpr std::uint32_t kSectionMagic = 0x53504753u;  // "SPGS"
}

void Disorder::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("Disorder: cannot open " + path.string() + " for writing");
    for (const auto& [p, values] : arrays_) {
        std::uint32_t magic = kSectionMagic;
        std::uint32_t n = static_cast<std::uint32_t>(n_);
        std::uint32_t pv = static_cast<std::uint32_t>(p);
        std::uint64_t count = values.size();
        out.write(reinterpret_cast<const char*>(&magic), sizeof magic);
        out.write(reinterpret_cast<const char*>(&n), sizeof n);
        out.write(reinterpret_cast<const char*>(&pv), sizeof pv);
        out.write(reinterpret_cast<const char*>(&count), sizeof count);
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(count * sizeof(double)));
    }
    if (!out) throw std::runtime_error("Disorder: write failed: " + path.string());
}

Disorder Disorder::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("Disorder: cannot open " + path.string());
    Disorder d;
    while (true) {
        std::uint32_t magic = 0, n = 0, p = 0;
        std::uint64_t count = 0;
        in.read(reinterpret_cast<char*>(&magic), sizeof magic);
        if (in.eof()) break;
        in.read(reinterpret_cast<char*>(&n), sizeof n);
        in.read(reinterpret_cast<char*>(&p), sizeof p);
        in.read(reinterpret_cast<char*>(&count), sizeof count);
        if (!in || magic != kSectionMagic)
            throw std::runtime_error("Disorder: corrupt section header in " + path.string());
        if (d.n_ == 0)
            d.n_ = static_cast<int>(n);
        else if (d.n_ != static_cast<int>(n))
            throw std::runtime_error("Disorder: inconsistent n_spins across sections");
        if (count != pow_size(static_cast<int>(n), static_cast<int>(p)))
            throw std::runtime_error("Disorder: section count does not match N^p");
        std::vector<double> values(count);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw std::runtime_error("Disorder: truncated section in " + path.string());
        d.arrays_.emplace_back(static_cast<int>(p), std::move(values));
    }
    return d;
}

SubsystemContext SubsystemContext::full(int n_spins) {
    SubsystemContext ctx;
    ctx.n_spins = n_spins;
    ctx.free_sites.resize(static_cast<std::size_t>(n_spins));
    for (int i = 0; i < n_spins; ++i) ctx.free_sites[static_cast<std::size_t>(i)] = i;
    return ctx;
}

SubsystemContext SubsystemContext::make(int n_spins,
                                        const std::vector<std::pair<int, int>>& frozen,
                                        const std::vector<int>& removed) {
    SubsystemContext ctx;
    ctx.n_spins = n_spins;
    std::vector<std::pair<int, int>> a = frozen;
    std::sort(a.begin(), a.end());
    std::vector<int> b = removed;
    std::sort(b.begin(), b.end());

    std::vector<bool> taken(static_cast<std::size_t>(n_spins), false);
    auto claim = [&](int site) {
        if (site < 0 || site >= n_spins)
            throw std::invalid_argument("SubsystemContext: site out of range");
        if (taken[static_cast<std::size_t>(site)])
            throw std::invalid_argument("SubsystemContext: sets A and B must be disjoint");
        taken[static_cast<std::size_t>(site)] = true;
    };
    for (const auto& [site, sign] : a) {
        claim(site);
        if (sign != 1 && sign != -1)
            throw std::invalid_argument("SubsystemContext: frozen signs must be +-1");
        ctx.frozen_sites.push_back(site);
        ctx.frozen_signs.push_back(static_cast<std::int8_t>(sign));
    }
    for (int site : b) {
        claim(site);
        ctx.removed_sites.push_back(site);
    }
    for (int i = 0; i < n_spins; ++i)
        if (!taken[static_cast<std::size_t>(i)]) ctx.free_sites.push_back(i);
    return ctx;
}

SubsystemContext SubsystemContext::freeze(int site, int sign) const {
    if (!is_free(site)) throw std::invalid_argument("freeze: site is not free");
    std::vector<std::pair<int, int>> a;
    for (std::size_t i = 0; i < frozen_sites.size(); ++i)
        a.emplace_back(frozen_sites[i], frozen_signs[i]);
    a.emplace_back(site, sign);
    return make(n_spins, a, removed_sites);
}

SubsystemContext SubsystemContext::remove(int site) const {
    if (!is_free(site)) throw std::invalid_argument("remove: site is not free");
    std::vector<std::pair<int, int>> a;
    for (std::size_t i = 0; i < frozen_sites.size(); ++i)
        a.emplace_back(frozen_sites[i], frozen_signs[i]);
    std::vector<int> b = removed_sites;
    b.push_back(site);
    return make(n_spins, a, b);
}

bool SubsystemContext::is_free(int site) const {
    return std::binary_search(free_sites.begin(), free_sites.end(), site);
}

int SubsystemContext::free_slot(int site) const {
    auto it = std::lower_bound(free_sites.begin(), free_sites.end(), site);
    if (it == free_sites.end() || *it != site)
        throw std::invalid_argument("free_slot: site is not free in this context");
    return static_cast<int>(it - free_sites.begin());
}

bool SubsystemContext::same_subsystem(const SubsystemContext& other) const {
    return n_spins == other.n_spins && frozen_sites == other.frozen_sites &&
           frozen_signs == other.frozen_signs && removed_sites == other.removed_sites;
}

std::string SubsystemContext::descriptor() const {
    std::ostringstream out;
    out << "N=" << n_spins << ";A=";
    for (std::size_t i = 0; i < frozen_sites.size(); ++i) {
        if (i) out << ",";
        out << (frozen_signs[i] > 0 ? "+" : "-") << frozen_sites[i];
    }
    out << ";B=";
    for (std::size_t i = 0; i < removed_sites.size(); ++i) {
        if (i) out << ",";
        out << removed_sites[i];
    }
    return out.str();
}

void SubsystemContext::signs(SpinWord cfg, std::vector<double>& out) const {
    out.assign(static_cast<std::size_t>(n_spins), 0.0);
    for (std::size_t i = 0; i < frozen_sites.size(); ++i)
        out[static_cast<std::size_t>(frozen_sites[i])] = static_cast<double>(frozen_signs[i]);
    for (std::size_t b = 0; b < free_sites.size(); ++b)
        out[static_cast<std::size_t>(free_sites[b])] =
            static_cast<double>(spin_of(cfg, static_cast<int>(b)));
}

std::vector<double> SubsystemContext::signs(SpinWord cfg) const {
    std::vector<double> out;
    signs(cfg, out);
    return out;
}

void for_each_subsystem(int n_spins, int k,
                        const std::function<void(const SubsystemContext&)>& visit) {
    if (k < 0 || k >= n_spins)
        throw std::invalid_argument("for_each_subsystem: require 0 <= k <= N-1");
    std::vector<int> comb(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) comb[static_cast<std::size_t>(i)] = i;
    while (true) {
        for (std::uint32_t part = 0; part < (1u << k); ++part) {
            int a_count = 0;
            for (int i = 0; i < k; ++i)
                if (part & (1u << i)) ++a_count;
            for (std::uint32_t sign = 0; sign < (1u << a_count); ++sign) {
                std::vector<std::pair<int, int>> frozen;
                std::vector<int> removed;
                int rank = 0;
                for (int i = 0; i < k; ++i) {
                    if (part & (1u << i)) {
                        frozen.emplace_back(comb[static_cast<std::size_t>(i)],
                                            (sign >> rank) & 1u ? +1 : -1);
                        ++rank;
                    } else {
                        removed.push_back(comb[static_cast<std::size_t>(i)]);
                    }
                }
                visit(SubsystemContext::make(n_spins, frozen, removed));
            }
        }
        int i = k - 1;
        while (i >= 0 && comb[static_cast<std::size_t>(i)] == n_spins - k + i) --i;
        if (i < 0) break;
        ++comb[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
    }
}

std::size_t count_subsystems(int n_spins, int k) {
    // C(N, k) * 3^k
    std::size_t binom = 1;
    for (int i = 0; i < k; ++i)
        binom = binom * static_cast<std::size_t>(n_spins - i) / static_cast<std::size_t>(i + 1);
    std::size_t pow3 = 1;
    for (int i = 0; i < k; ++i) pow3 *= 3;
    return binom * pow3;
}

namespace {

// Sum of g[tuple] * prod of s over unfixed slots, over all ordered tuples.
// Fixed slots (fa < fb when both present, -1 when absent) hold given sites.
// Zero entries of s prune whole subtrees, which realizes the B^c restriction.
double slot_sum(const double* g, int n, int p, int slot, std::size_t idx, double prod,
                int fa, int sa, int fb, int sb, const double* s) {
    if (slot == p) return g[idx] * prod;
    if (slot == fa)
        return slot_sum(g, n, p, slot + 1, idx * static_cast<std::size_t>(n) + sa, prod, fa, sa,
                        fb, sb, s);
    if (slot == fb)
        return slot_sum(g, n, p, slot + 1, idx * static_cast<std::size_t>(n) + sb, prod, fa, sa,
                        fb, sb, s);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double si = s[i];
        if (si == 0.0) continue;
        acc += slot_sum(g, n, p, slot + 1, idx * static_cast<std::size_t>(n) + i, prod * si, fa,
                        sa, fb, sb, s);
    }
    return acc;
}

}  // namespace

namespace detail {

double hamiltonian_s(const ModelSpec& spec, const Disorder& dis, const double* s) {
    double h = 0.0;
    for (const auto& term : spec.mixing) {
        if (term.beta_p == 0.0) continue;
        const auto& g = dis.couplings(term.p);
        h += term.beta_p * spec.coupling_scale(term.p) *
             slot_sum(g.data(), spec.n_spins, term.p, 0, 0, 1.0, -1, -1, -1, -1, s);
    }
    for (int i = 0; i < spec.n_spins; ++i)
        h += spec.external_field[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)];
    return h;
}

double cavity_field_s(const ModelSpec& spec, const Disorder& dis, int j, const double* s) {
    double b = spec.external_field[static_cast<std::size_t>(j)];
    for (const auto& term : spec.mixing) {
        if (term.beta_p == 0.0) continue;
        const auto& g = dis.couplings(term.p);
        double acc = 0.0;
        for (int r = 0; r < term.p; ++r)
            acc += slot_sum(g.data(), spec.n_spins, term.p, 0, 0, 1.0, r, j, -1, -1, s);
        b += term.beta_p * spec.coupling_scale(term.p) * acc;
    }
    return b;
}

double cavity_derivative_s(const ModelSpec& spec, const Disorder& dis, int i, int j,
                           const double* s) {
    if (i == j) return 0.0;
    double coeff = 0.0;
    for (const auto& term : spec.mixing) {
        if (term.beta_p == 0.0 || term.p < 2) continue;
        const auto& g = dis.couplings(term.p);
        double acc = 0.0;
        for (int r = 0; r < term.p; ++r) {
            for (int rp = 0; rp < term.p; ++rp) {
                if (rp == r) continue;
                int fa, sa, fb, sb;
                if (r < rp) {
                    fa = r; sa = j; fb = rp; sb = i;
                } else {
                    fa = rp; sa = i; fb = r; sb = j;
                }
                acc += slot_sum(g.data(), spec.n_spins, term.p, 0, 0, 1.0, fa, sa, fb, sb, s);
            }
        }
        coeff += term.beta_p * spec.coupling_scale(term.p) * acc;
    }
    return s[static_cast<std::size_t>(i)] * coeff;
}

}  // namespace detail

double hamiltonian(const ModelSpec& spec, const Disorder& dis, const SubsystemContext& ctx,
                   SpinWord cfg) {
    std::vector<double> s = ctx.signs(cfg);
    return detail::hamiltonian_s(spec, dis, s.data());
}

double cavity_field(const ModelSpec& spec, const Disorder& dis, const SubsystemContext& ctx,
                    int site, SpinWord cfg) {
    if (!ctx.is_free(site)) throw std::invalid_argument("cavity_field: site is not free");
    std::vector<double> s = ctx.signs(cfg);
    return detail::cavity_field_s(spec, dis, site, s.data());
}

double cavity_field_derivative(const ModelSpec& spec, const Disorder& dis,
                               const SubsystemContext& ctx, int i, int j, SpinWord cfg) {
    if (!ctx.is_free(i) || !ctx.is_free(j))
        throw std::invalid_argument("cavity_field_derivative: sites must be free");
    std::vector<double> s = ctx.signs(cfg);
    return detail::cavity_derivative_s(spec, dis, i, j, s.data());
}

}  // namespace spingap
