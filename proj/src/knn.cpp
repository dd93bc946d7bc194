/*
 * Copyright 2026 The medimpute Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "medimpute/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "medimpute/errors.hpp"

namespace medimpute {

Hyperparams Hyperparams::shared(std::size_t p, double alpha, double lambda, std::size_t k) {
    return Hyperparams{std::vector<double>(p, alpha), std::vector<double>(p, lambda), k};
}

void Hyperparams::validate(std::size_t p, std::size_t n) const {
    if (alpha.size() != p || lambda.size() != p)
        throw InvalidArgument("alpha and lambda need one entry per feature (" + std::to_string(p) + ")");
    for (double a : alpha)
        if (!(a >= 0.0 && a <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
    for (double l : lambda)
        if (!(l > 0.0 && l <= 1.0)) throw InvalidArgument("lambda must lie in (0, 1]");
    if (k == 0) throw InvalidArgument("k must be positive");
    if (k >= n) throw InvalidArgument("k must be smaller than the number of rows");
}

bool Hyperparams::shared_alpha() const {
    return std::adjacent_find(alpha.begin(), alpha.end(), std::not_equal_to<>()) == alpha.end();
}

DecayTable::DecayTable(const PanelDataset& ds, const Hyperparams& hp) : p_(ds.n_features()) {
    if (hp.lambda.size() != p_) throw InvalidArgument("lambda needs one entry per feature");
    const std::size_t n = ds.n_rows();
    offset_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [begin, end] = ds.individual_rows(ds.individual(i));
        offset_[i + 1] = offset_[i] + (end - begin - 1);
    }
    partner_.reserve(offset_[n]);
    coef_.reserve(offset_[n] * p_);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [begin, end] = ds.individual_rows(ds.individual(i));
        for (std::size_t j = begin; j < end; ++j) {
            if (j == i) continue;
            partner_.push_back(j);
            const double gap = std::abs(ds.timestamp(i) - ds.timestamp(j));
            for (std::size_t d = 0; d < p_; ++d) coef_.push_back(std::pow(hp.lambda[d], gap));
        }
    }
}

double DecayTable::coefficient(std::size_t i, std::size_t j, std::size_t d) const {
    const auto rows = partners(i);
    const auto it = std::lower_bound(rows.begin(), rows.end(), j);
    if (it == rows.end() || *it != j) return 0.0;
    return coefficient_at(i, static_cast<std::size_t>(it - rows.begin()), d);
}

DecayTable build_decay_table(const PanelDataset& ds, const Hyperparams& hp) { return DecayTable(ds, hp); }

CompletedMatrix::CompletedMatrix(const PanelDataset& ds, std::span<const double> fill)
    : n_(ds.n_rows()), p0_(ds.n_continuous()), p1_(ds.n_categorical()) {
    const std::size_t p = p0_ + p1_;
    if (fill.size() != p) throw InvalidArgument("fill needs one value per feature");
    for (std::size_t d = p0_; d < p; ++d) cardinality_.push_back(ds.cardinality(d));
    w_.resize(n_ * p0_);
    v_.resize(n_ * p1_);
    missing_.resize(n_ * p);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t d = 0; d < p; ++d) {
            const bool miss = ds.is_missing(i, d);
            missing_[i * p + d] = miss ? 1 : 0;
            if (d < p0_) {
                w_[i * p0_ + d] = miss ? fill[d] : *ds.continuous(i, d);
            } else if (miss) {
                const int code = static_cast<int>(fill[d]);
                if (code < 0 || code >= cardinality_[d - p0_] || static_cast<double>(code) != fill[d])
                    throw InvalidArgument("categorical fill is not a valid category code");
                v_[i * p1_ + (d - p0_)] = code;
            } else {
                v_[i * p1_ + (d - p0_)] = *ds.category(i, d);
            }
        }
    }
}

bool CompletedMatrix::row_incomplete(std::size_t i) const {
    const std::size_t p = p0_ + p1_;
    for (std::size_t d = 0; d < p; ++d)
        if (missing_[i * p + d]) return true;
    return false;
}

double CompletedMatrix::value(std::size_t i, std::size_t d) const {
    return d < p0_ ? continuous(i, d) : static_cast<double>(category(i, d));
}

void CompletedMatrix::set_continuous(std::size_t i, std::size_t d, double x) {
    if (d >= p0_ || !is_missing(i, d)) throw std::logic_error("only missing continuous cells may be imputed");
    w_[i * p0_ + d] = x;
}

void CompletedMatrix::set_category(std::size_t i, std::size_t d, int c) {
    if (d < p0_ || !is_missing(i, d)) throw std::logic_error("only missing categorical cells may be imputed");
    if (c < 0 || c >= cardinality(d)) throw std::logic_error("category code out of range");
    v_[i * p1_ + (d - p0_)] = c;
}

PanelDataset CompletedMatrix::to_dataset(const PanelDataset& source) const {
    if (source.n_rows() != n_ || source.n_continuous() != p0_ || source.n_categorical() != p1_)
        throw InvalidArgument("completed matrix does not match the dataset");
    auto s = source.storage();
    s.continuous = w_;
    s.categorical = v_;
    std::fill(s.missing.begin(), s.missing.end(), std::uint8_t{0});
    return PanelDataset(std::move(s));
}

std::vector<std::size_t> incomplete_rows(const CompletedMatrix& cm) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < cm.n_rows(); ++i)
        if (cm.row_incomplete(i)) rows.push_back(i);
    return rows;
}

namespace {

// Accumulation order shared with assign_neighbors, so both produce identical bits.
inline double distance_kernel(const double* wi, const double* wj, std::size_t p0, const int* vi, const int* vj,
                              std::size_t p1) {
    double dist = 0.0;
    for (std::size_t d = 0; d < p0; ++d) {
        const double diff = wi[d] - wj[d];
        dist += diff * diff;
    }
    for (std::size_t c = 0; c < p1; ++c)
        if (vi[c] != vj[c]) dist += 1.0;
    return dist;
}

// Distances from row i to every row, from feature-major copies of the
// completed matrix. Four features go per pass over dist; the per-row sum
// order matches distance_kernel, so the bits are the same.
__attribute__((target_clones("avx2", "default"))) void row_distances(std::size_t i, std::size_t n, std::size_t p0,
                                                                     std::size_t p1, const double* wt, const int* vt,
                                                                     double* dist) {
    std::fill(dist, dist + n, 0.0);
    std::size_t d = 0;
    for (; d + 4 <= p0; d += 4) {
        const double a0 = wt[d * n + i], a1 = wt[(d + 1) * n + i], a2 = wt[(d + 2) * n + i],
                     a3 = wt[(d + 3) * n + i];
        const double* c0 = wt + d * n;
        const double *c1 = c0 + n, *c2 = c1 + n, *c3 = c2 + n;
        for (std::size_t j = 0; j < n; ++j) {
            const double e0 = a0 - c0[j], e1 = a1 - c1[j], e2 = a2 - c2[j], e3 = a3 - c3[j];
            double acc = dist[j];
            acc += e0 * e0;
            acc += e1 * e1;
            acc += e2 * e2;
            acc += e3 * e3;
            dist[j] = acc;
        }
    }
    for (; d < p0; ++d) {
        const double wi = wt[d * n + i];
        const double* col = wt + d * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double diff = wi - col[j];
            dist[j] += diff * diff;
        }
    }
    for (std::size_t c = 0; c < p1; ++c) {
        const int vi = vt[c * n + i];
        const int* col = vt + c * n;
        for (std::size_t j = 0; j < n; ++j) dist[j] += col[j] != vi ? 1.0 : 0.0;
    }
}

}  // namespace

double pairwise_distance(std::size_t i, std::size_t j, const CompletedMatrix& cm) {
    return distance_kernel(cm.continuous_row(i).data(), cm.continuous_row(j).data(), cm.n_continuous(),
                           cm.categorical_row(i).data(), cm.categorical_row(j).data(), cm.n_categorical());
}

NeighborAssignment::NeighborAssignment(std::size_t n_rows, std::vector<std::size_t> incomplete,
                                       std::vector<std::size_t> neighbors, std::size_t k)
    : k_(k), incomplete_(std::move(incomplete)), neighbors_(std::move(neighbors)), slot_(n_rows, npos) {
    if (neighbors_.size() != incomplete_.size() * k_) throw InvalidArgument("every incomplete row needs exactly k neighbors");
    for (std::size_t s = 0; s < incomplete_.size(); ++s) {
        const std::size_t i = incomplete_[s];
        if (i >= n_rows || (s > 0 && i <= incomplete_[s - 1]))
            throw InvalidArgument("incomplete rows must be ascending and in range");
        slot_[i] = s;
    }
    referrer_offset_.assign(n_rows + 1, 0);
    for (std::size_t s = 0; s < incomplete_.size(); ++s) {
        const std::size_t i = incomplete_[s];
        for (std::size_t a = 0; a < k_; ++a) {
            const std::size_t j = neighbors_[s * k_ + a];
            if (j >= n_rows || j == i) throw InvalidArgument("neighbor list holds an invalid row");
            for (std::size_t b = 0; b < a; ++b)
                if (neighbors_[s * k_ + b] == j) throw InvalidArgument("neighbor list holds a duplicate row");
            ++referrer_offset_[j + 1];
        }
    }
    for (std::size_t j = 0; j < n_rows; ++j) referrer_offset_[j + 1] += referrer_offset_[j];
    referrer_.resize(referrer_offset_[n_rows]);
    std::vector<std::size_t> fill(referrer_offset_.begin(), referrer_offset_.end() - 1);
    for (std::size_t s = 0; s < incomplete_.size(); ++s)
        for (std::size_t a = 0; a < k_; ++a) referrer_[fill[neighbors_[s * k_ + a]]++] = incomplete_[s];
}

std::span<const std::size_t> NeighborAssignment::neighbors(std::size_t i) const {
    const std::size_t s = slot_.at(i);
    if (s == npos) return {};
    return {neighbors_.data() + s * k_, k_};
}

NeighborAssignment assign_neighbors(const CompletedMatrix& cm, std::span<const std::size_t> rows, std::size_t k) {
    const std::size_t n = cm.n_rows();
    if (!rows.empty() && (k == 0 || k >= n)) throw InvalidArgument("k must satisfy 0 < k < number of rows");
    const std::size_t p0 = cm.n_continuous();
    const std::size_t p1 = cm.n_categorical();

    // Feature-major copies: one row's distances to every other row then run
    // down contiguous columns, accumulated feature by feature in the same
    // order as distance_kernel.
    std::vector<double> wt(p0 * n);
    std::vector<int> vt(p1 * n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto wj = cm.continuous_row(j);
        const auto vj = cm.categorical_row(j);
        for (std::size_t d = 0; d < p0; ++d) wt[d * n + j] = wj[d];
        for (std::size_t c = 0; c < p1; ++c) vt[c * n + j] = vj[c];
    }

    std::vector<std::size_t> incomplete(rows.begin(), rows.end());
    std::vector<std::size_t> neighbors;
    neighbors.reserve(rows.size() * k);
    std::vector<double> dist(n);
    // Bounded max-heap on (distance, index): the k smallest pairs in that order.
    std::vector<std::pair<double, std::size_t>> heap;
    heap.reserve(k);
    for (std::size_t i : incomplete) {
        row_distances(i, n, p0, p1, wt.data(), vt.data(), dist.data());

        heap.clear();
        std::size_t j = 0;
        for (; heap.size() < k; ++j)
            if (j != i) heap.emplace_back(dist[j], j);
        std::make_heap(heap.begin(), heap.end());
        // Row i can never displace anything. Later rows only win on a
        // strictly smaller distance because their index is larger.
        dist[i] = std::numeric_limits<double>::infinity();
        double bound = heap.front().first;
        for (; j < n; ++j) {
            if (!(dist[j] < bound)) continue;
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = {dist[j], j};
            std::push_heap(heap.begin(), heap.end());
            bound = heap.front().first;
        }
        std::sort_heap(heap.begin(), heap.end());
        for (const auto& entry : heap) neighbors.push_back(entry.second);
    }
    return NeighborAssignment(n, std::move(incomplete), std::move(neighbors), k);
}

namespace {

struct PartnerTerms {
    double z_forward = 0.0, z_reverse = 0.0, c_forward = 0.0, c_reverse = 0.0;
};

// Row-indexed accumulator for partner_weights. Every field receives at most
// one contribution per partner row, so the sums do not depend on visit order.
struct PartnerScratch {
    std::vector<PartnerTerms> terms;
    std::vector<std::uint8_t> seen;
    std::vector<std::size_t> touched;
};

void collect_partner_weights(std::size_t i, std::size_t d, const NeighborAssignment& na, const Hyperparams& hp,
                             const DecayTable& dt, PartnerScratch& scratch, std::vector<PartnerWeight>& out) {
    out.clear();
    if (scratch.terms.size() < na.n_rows()) {
        scratch.terms.resize(na.n_rows());
        scratch.seen.resize(na.n_rows(), 0);
    }
    auto& touched = scratch.touched;
    auto& terms = scratch.terms;
    touched.clear();
    auto visit = [&](std::size_t j) -> PartnerTerms& {
        if (!scratch.seen[j]) {
            scratch.seen[j] = 1;
            touched.push_back(j);
        }
        return terms[j];
    };
    const bool i_incomplete = na.is_incomplete(i);
    for (std::size_t j : na.neighbors(i)) visit(j).z_forward = 1.0;
    for (std::size_t j : na.referrers(i)) visit(j).z_reverse = 1.0;
    const auto partners = dt.partners(i);
    for (std::size_t slot = 0; slot < partners.size(); ++slot) {
        const std::size_t j = partners[slot];
        const double c = dt.coefficient_at(i, slot, d);
        auto& t = visit(j);
        t.c_forward = i_incomplete ? c : 0.0;
        t.c_reverse = na.is_incomplete(j) ? c : 0.0;
    }
    std::sort(touched.begin(), touched.end());

    const double a = hp.alpha[d];
    for (std::size_t j : touched) {
        const PartnerTerms t = std::exchange(terms[j], PartnerTerms{});
        scratch.seen[j] = 0;
        const double u = (1.0 - a) * (t.z_forward + t.z_reverse) + a * (t.c_forward + t.c_reverse);
        if (u > 0.0) out.push_back({j, u});
    }
}

const std::vector<PartnerWeight>& scratch_partner_weights(std::size_t i, std::size_t d, const NeighborAssignment& na,
                                                          const Hyperparams& hp, const DecayTable& dt) {
    thread_local PartnerScratch scratch;
    thread_local std::vector<PartnerWeight> out;
    collect_partner_weights(i, d, na, hp, dt, scratch, out);
    return out;
}

}  // namespace

std::vector<PartnerWeight> partner_weights(std::size_t i, std::size_t d, const NeighborAssignment& na,
                                           const Hyperparams& hp, const DecayTable& dt) {
    PartnerScratch scratch;
    std::vector<PartnerWeight> out;
    collect_partner_weights(i, d, na, hp, dt, scratch, out);
    return out;
}

std::optional<double> update_continuous_cell(std::size_t i, std::size_t d, const NeighborAssignment& na,
                                             const CompletedMatrix& cm, const Hyperparams& hp,
                                             const DecayTable& dt) {
    if (!cm.is_continuous(d) || !cm.is_missing(i, d))
        throw InvalidArgument("update_continuous_cell expects a missing continuous cell");
    const auto& weights = scratch_partner_weights(i, d, na, hp, dt);
    if (weights.empty()) return std::nullopt;
    // Mean taken relative to the first partner and clamped to the partner
    // range: a single partner or identical partners come back exactly.
    const double ref = cm.continuous(weights.front().row, d);
    double lo = ref, hi = ref, num = 0.0, den = 0.0;
    for (const auto& [j, u] : weights) {
        const double x = cm.continuous(j, d);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        num += u * (x - ref);
        den += u;
    }
    return std::clamp(ref + num / den, lo, hi);
}

std::optional<int> update_categorical_cell(std::size_t i, std::size_t d, const NeighborAssignment& na,
                                           const CompletedMatrix& cm, const Hyperparams& hp,
                                           const DecayTable& dt) {
    if (cm.is_continuous(d) || !cm.is_missing(i, d))
        throw InvalidArgument("update_categorical_cell expects a missing categorical cell");
    const auto& weights = scratch_partner_weights(i, d, na, hp, dt);
    if (weights.empty()) return std::nullopt;
    int best = 0;
    double best_cost = 0.0;
    for (int c = 0; c < cm.cardinality(d); ++c) {
        double cost = 0.0;
        for (const auto& [j, u] : weights)
            if (cm.category(j, d) != c) cost += u;
        if (c == 0 || cost < best_cost) {
            best = c;
            best_cost = cost;
        }
    }
    return best;
}

double objective_value(const CompletedMatrix& cm, const NeighborAssignment& na, const Hyperparams& hp,
                       const DecayTable& dt) {
    const std::size_t p0 = cm.n_continuous();
    const std::size_t p = cm.n_features();
    auto weighted_distance = [&](std::size_t i, std::size_t j, auto&& weight) {
        double total = 0.0;
        for (std::size_t d = 0; d < p0; ++d) {
            const double diff = cm.continuous(i, d) - cm.continuous(j, d);
            total += weight(d) * (diff * diff);
        }
        for (std::size_t d = p0; d < p; ++d)
            if (cm.category(i, d) != cm.category(j, d)) total += weight(d);
        return total;
    };

    double knn_term = 0.0;
    double series_term = 0.0;
    for (std::size_t i : na.incomplete_rows()) {
        for (std::size_t j : na.neighbors(i))
            knn_term += weighted_distance(i, j, [&](std::size_t d) { return 1.0 - hp.alpha[d]; });
        const auto partners = dt.partners(i);
        for (std::size_t slot = 0; slot < partners.size(); ++slot)
            series_term += weighted_distance(
                i, partners[slot], [&](std::size_t d) { return hp.alpha[d] * dt.coefficient_at(i, slot, d); });
    }
    return knn_term + series_term;
}

}  // namespace medimpute
