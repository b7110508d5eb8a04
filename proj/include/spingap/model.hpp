#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace spingap {

// Configuration of the free sites of a subsystem, packed as a bitmask.
// Bit b corresponds to the b-th free site in ascending site order; a set bit
// encodes spin +1, a clear bit spin -1. Tables indexed by SpinWord from
// different contexts must never be mixed.
using SpinWord = std::uint32_t;

inline SpinWord flip_bit(SpinWord cfg, int bit) { return cfg ^ (SpinWord{1} << bit); }
inline int spin_of(SpinWord cfg, int bit) { return (cfg >> bit) & 1u ? +1 : -1; }
// Insert a bit (shifting higher bits up) / remove a bit (shifting down).
SpinWord insert_bit(SpinWord cfg, int pos, int sign);
SpinWord remove_bit(SpinWord cfg, int pos);

struct MixingTerm {
    int p = 2;          // interaction degree, >= 2
    double beta_p = 0;  // temperature coefficient, >= 0
};

// System size, mixing coefficients (p, beta_p), external fields and the seed
// that makes every disorder draw reproducible.
struct ModelSpec {
    int n_spins = 0;
    std::vector<MixingTerm> mixing;       // strictly increasing in p
    std::vector<double> external_field;   // exactly n_spins entries
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when any invariant is violated.
    void validate() const;

    double field(int site) const { return external_field[static_cast<std::size_t>(site)]; }
    // beta_p / N^{(p-1)/2}
    double coupling_scale(int p) const;
};

/// Scalar temperature aggregate: sum over p of sqrt(p^3 log p) * beta_p
/// (natural logarithm).
double beta_aggregate(const ModelSpec& spec);

/// (1e3 * beta)^2 * exp(1e3 * beta).
double c_beta(double beta);

/// (20 |K| beta)^2 * exp(20 |K| beta).
double c_k_beta(double k_value, double beta);

// Dense rank-p Gaussian coupling arrays, one per supported p. Entries are
// attached to ordered tuples; any tuple with a repeated index is exactly zero.
// Each distinct-index entry is an independent standard Gaussian determined by
// (seed, p, linear tuple index), so two samples from the same spec agree
// bitwise regardless of evaluation order or thread count.
class Disorder {
public:
    static constexpr std::size_t kDefaultEntryCap = 100'000'000;

    Disorder() = default;

    static Disorder sample(const ModelSpec& spec, std::size_t entry_cap = kDefaultEntryCap);

    int n_spins() const { return n_; }
    bool has_p(int p) const;
    /// Dense row-major array of size n_spins^p.
    const std::vector<double>& couplings(int p) const;
    /// Value for one ordered tuple of 0-based sites.
    double coupling(int p, std::span<const int> tuple) const;
    std::vector<int> supported_p() const;

    // Flat binary dump: per-p section with header (magic, N, p, element count)
    // followed by raw little-endian doubles.
    void save(const std::filesystem::path& path) const;
    static Disorder load(const std::filesystem::path& path);

private:
    int n_ = 0;
    std::vector<std::pair<int, std::vector<double>>> arrays_;  // sorted by p
};

Disorder sample_disorder(const ModelSpec& spec, std::size_t entry_cap = Disorder::kDefaultEntryCap);

// A conditioned/reduced subsystem: sites in A are frozen at given signs,
// sites in B are removed from the Hamiltonian, the rest are free.
struct SubsystemContext {
    int n_spins = 0;
    std::vector<int> frozen_sites;          // A, ascending
    std::vector<std::int8_t> frozen_signs;  // +-1, aligned with frozen_sites
    std::vector<int> removed_sites;         // B, ascending
    std::vector<int> free_sites;            // ascending complement of A and B

    static SubsystemContext full(int n_spins);
    /// frozen holds (site, sign) pairs; removed holds sites. Validates.
    static SubsystemContext make(int n_spins, const std::vector<std::pair<int, int>>& frozen,
                                 const std::vector<int>& removed);

    SubsystemContext freeze(int site, int sign) const;  // move a free site into A
    SubsystemContext remove(int site) const;            // move a free site into B

    int n_free() const { return static_cast<int>(free_sites.size()); }
    int k() const { return static_cast<int>(frozen_sites.size() + removed_sites.size()); }
    std::size_t n_configs() const { return std::size_t{1} << free_sites.size(); }

    bool is_free(int site) const;
    /// Position of a free site in the bitmask; throws if not free.
    int free_slot(int site) const;

    bool same_subsystem(const SubsystemContext& other) const;
    /// Stable human/machine-readable descriptor, e.g. "N=8;A=+3,-5;B=2".
    std::string descriptor() const;

    // Merged sign vector over all sites: +-1 for frozen/free sites, 0 for
    // removed ones. Zero entries make the B^c tuple restriction automatic.
    void signs(SpinWord cfg, std::vector<double>& out) const;
    std::vector<double> signs(SpinWord cfg) const;
};

// Subsystem Hamiltonian: all ordered tuples with indices outside B, scaled by
// beta_p / N^{(p-1)/2} with the full system size N, plus the field term over
// sites outside B. With A = B = empty this is the full Hamiltonian.
double hamiltonian(const ModelSpec& spec, const Disorder& dis, const SubsystemContext& ctx,
                   SpinWord cfg);

// Cavity field B_j: for each p, the p slot-sums with j fixed in one slot and
// the remaining indices outside B, plus the external field at j. Independent
// of the spin at j. Throws if j is not free.
double cavity_field(const ModelSpec& spec, const Disorder& dis, const SubsystemContext& ctx,
                    int site, SpinWord cfg);

// Discrete derivative of the cavity field, (d_i B_j)(cfg) = half the flip
// difference in direction i. Zero when i == j.
double cavity_field_derivative(const ModelSpec& spec, const Disorder& dis,
                               const SubsystemContext& ctx, int i, int j, SpinWord cfg);

// Visits every disjoint (A, B) with |A u B| = k together with every frozen
// configuration sigma_A, in a fixed deterministic order.
void for_each_subsystem(int n_spins, int k,
                        const std::function<void(const SubsystemContext&)>& visit);

/// Number of (A, B, sigma_A) instances with |A u B| = k: C(N, k) * 3^k.
std::size_t count_subsystems(int n_spins, int k);

namespace detail {
// Inner kernels on a merged sign vector (size n_spins, 0 on removed sites).
double hamiltonian_s(const ModelSpec& spec, const Disorder& dis, const double* s);
double cavity_field_s(const ModelSpec& spec, const Disorder& dis, int j, const double* s);
double cavity_derivative_s(const ModelSpec& spec, const Disorder& dis, int i, int j,
                           const double* s);
}  // namespace detail

}  // namespace spingap
