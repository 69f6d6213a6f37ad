#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace pbill {

/// Dirichlet rectangle [0, lx] x [0, ly] holding a particle of mass `mass` (hbar = 1).
struct BilliardSpec {
    double lx = 1.0;
    double ly = std::numbers::phi;
    double mass = 1.0;

    double area() const noexcept { return lx * ly; }
    /// Throws ContractError unless all fields are finite and positive.
    void validate() const;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct Mode {
    int mx = 1;
    int my = 1;
    double energy = 0.0;
    std::size_t index = 0;  // 1-based rank in energy order
};

/// Closed-form eigenvalue (pi^2 / 2M) (mx^2/lx^2 + my^2/ly^2).
double mode_energy(const BilliardSpec& spec, int mx, int my) noexcept;

/// Average level density M S / 2 pi; constant in two dimensions.
double weyl_density(const BilliardSpec& spec);

/// sin(m pi c / L). Shared by the eigenfunction evaluator and the series caches
/// so that cached values are bit-identical to eval_eigenfunction.
double sine_factor(int m, double c, double length) noexcept;

/// Normalized Dirichlet eigenfunction (2/sqrt(S)) sin(mx pi x/lx) sin(my pi y/ly).
/// Throws ContractError for points outside the closed rectangle.
double eval_eigenfunction(const BilliardSpec& spec, const Mode& mode, Point p);
double eval_eigenfunction(const BilliardSpec& spec, int mx, int my, Point p);

/// Energy-sorted lowest modes of the rectangle. Immutable after construction.
///
/// Storage is structure-of-arrays so that the series kernels can stream the
/// energies directly. Ties in energy are ordered lexicographically by (mx, my).
class ModeTable {
public:
    static constexpr std::size_t default_mode_budget = 20'000'000;

    /// All modes with energy <= e_cut.
    static ModeTable up_to_energy(const BilliardSpec& spec, double e_cut,
                                  std::size_t mode_budget = default_mode_budget);

    /// The lowest `count` modes, extended upward if needed so that a degenerate
    /// group is never split at the cut.
    static ModeTable lowest(const BilliardSpec& spec, std::size_t count,
                            std::size_t mode_budget = default_mode_budget);

    const BilliardSpec& spec() const noexcept { return spec_; }
    std::size_t size() const noexcept { return energy_.size(); }
    bool empty() const noexcept { return energy_.empty(); }

    std::span<const double> energies() const noexcept { return energy_; }
    std::span<const int> mx() const noexcept { return mx_; }
    std::span<const int> my() const noexcept { return my_; }
    double energy(std::size_t n) const { return energy_[n]; }

    /// Zero-based access; Mode::index is n + 1.
    Mode mode(std::size_t n) const;

    /// Number of modes with energy strictly below e.
    std::size_t count_below(double e) const noexcept;
    /// Number of modes with energy <= e.
    std::size_t count_at_or_below(double e) const noexcept;

    /// Distinct energies with their [first, last) index ranges.
    struct Level {
        double energy;
        std::size_t first;
        std::size_t last;
        std::size_t multiplicity() const noexcept { return last - first; }
    };
    std::vector<Level> distinct_levels() const;

private:
    ModeTable(BilliardSpec spec, std::vector<int> mx, std::vector<int> my, std::vector<double> energy)
        : spec_(spec), mx_(std::move(mx)), my_(std::move(my)), energy_(std::move(energy)) {}

    BilliardSpec spec_;
    std::vector<int> mx_;
    std::vector<int> my_;
    std::vector<double> energy_;
};

}  // namespace pbill
