#pragma once

#include "ttc/rng.hpp"
#include "ttc/tensor.hpp"
#include "ttc/tt_tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace ttc {

/// The observation data: a set S of n distinct cell indices and the vector Y
/// of observed values at those cells.
struct ObservationSet {
    Shape shape;
    std::vector<MultiIndex> indices;
    Vector values;

    ObservationSet(Shape shape_, std::vector<MultiIndex> indices_, Vector values_)
        : shape(std::move(shape_)), indices(std::move(indices_)), values(std::move(values_)) {
        if (indices.empty()) throw std::invalid_argument("ObservationSet: empty index set");
        if (static_cast<std::uint64_t>(indices.size()) > shape.num_elements())
            throw std::invalid_argument("ObservationSet: more observations than cells");
        if (static_cast<Eigen::Index>(indices.size()) != values.size())
            throw std::invalid_argument("ObservationSet: index/value count mismatch");
        if (!values.allFinite())
            throw std::invalid_argument("ObservationSet: non-finite observed value");
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(indices.size());
        for (const auto& idx : indices)
            if (!seen.insert(shape.linearize(idx)).second)
                throw std::invalid_argument("ObservationSet: duplicate index");
    }

    Index n() const { return static_cast<Index>(indices.size()); }
};

/// n distinct cell indices drawn uniformly without replacement; deterministic
/// per seed. Uses a partial Fisher-Yates shuffle when the full index space is
/// small enough to enumerate, rejection sampling otherwise.
inline std::vector<MultiIndex> sample_mask(const Shape& shape, std::uint64_t n,
                                           std::uint64_t seed) {
    std::uint64_t total = shape.num_elements();
    if (n < 1 || n > total) throw std::invalid_argument("sample_mask: n out of range");
    Rng rng(seed);
    std::vector<std::uint64_t> flats;
    flats.reserve(n);
    if (total <= (std::uint64_t{1} << 22) || n * 2 >= total) {
        std::vector<std::uint64_t> all(total);
        for (std::uint64_t i = 0; i < total; ++i) all[i] = i;
        for (std::uint64_t i = 0; i < n; ++i) {
            std::uint64_t j = i + rng.uniform_below(total - i);
            std::swap(all[i], all[j]);
            flats.push_back(all[i]);
        }
    } else {
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(n * 2);
        while (flats.size() < n) {
            std::uint64_t f = rng.uniform_below(total);
            if (seen.insert(f).second) flats.push_back(f);
        }
    }
    std::vector<MultiIndex> out;
    out.reserve(n);
    for (std::uint64_t f : flats) out.push_back(shape.delinearize(f));
    return out;
}

/// The rearranging operator: entry i of the result is X at the i-th index.
inline Vector apply_mask(const DenseTensor& x, const std::vector<MultiIndex>& s) {
    Vector out(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) out[static_cast<Eigen::Index>(i)] = x.at(s[i]);
    return out;
}

/// TT overload; evaluates elements directly, never densifying.
inline Vector apply_mask(const TTTensor& x, const std::vector<MultiIndex>& s) {
    Vector out(static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = tt_element(x, s[i]);
    return out;
}

/// Adjoint of apply_mask: embeds v at the masked cells, zero elsewhere.
inline DenseTensor adjoint_mask(const Vector& v, const std::vector<MultiIndex>& s,
                                const Shape& shape, std::uint64_t cap = kDefaultDenseCap) {
    if (static_cast<std::size_t>(v.size()) != s.size())
        throw std::invalid_argument("adjoint_mask: vector/index count mismatch");
    DenseTensor out(shape, cap);
    for (std::size_t i = 0; i < s.size(); ++i) out.at(s[i]) = v[static_cast<Eigen::Index>(i)];
    return out;
}

namespace detail {

inline ObservationSet observe_values(Shape shape, std::vector<MultiIndex> s, Vector clean,
                                     double sigma, std::uint64_t seed) {
    if (sigma < 0) throw std::invalid_argument("observe: sigma must be nonnegative");
    if (sigma > 0) {
        Rng rng(seed);
        for (Eigen::Index i = 0; i < clean.size(); ++i) clean[i] += sigma * rng.normal();
    }
    return ObservationSet(std::move(shape), std::move(s), std::move(clean));
}

}  // namespace detail

/// y_i = X*[j(i)] + eps_i with eps_i i.i.d. Gaussian(0, sigma^2);
/// sigma = 0 observes exactly.
inline ObservationSet observe(const DenseTensor& x_true, const std::vector<MultiIndex>& s,
                              double sigma, std::uint64_t seed) {
    return detail::observe_values(x_true.shape(), s, apply_mask(x_true, s), sigma, seed);
}

inline ObservationSet observe(const TTTensor& x_true, const std::vector<MultiIndex>& s,
                              double sigma, std::uint64_t seed) {
    return detail::observe_values(x_true.shape(), s, apply_mask(x_true, s), sigma, seed);
}

/// The regularization floor ||X*(E)||_inf / n: with distinct indices the
/// adjoint embedding's max norm is just the largest |noise| entry.
inline double lambda_floor(const Vector& noise, const std::vector<MultiIndex>& s,
                           const Shape& shape) {
    if (static_cast<std::size_t>(noise.size()) != s.size())
        throw std::invalid_argument("lambda_floor: vector/index count mismatch");
    for (const auto& idx : s) shape.check_index(idx);
    if (noise.size() == 0) return 0.0;
    return noise.cwiseAbs().maxCoeff() / static_cast<double>(noise.size());
}

}  // namespace ttc
