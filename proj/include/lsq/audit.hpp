#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsq/regression.hpp"

namespace lsq {

enum class AuditTarget { maximize_delta, flip_sign };

// What to search for. For maximize_delta the payoff is
// direction^T (beta_hat - beta_hat_subset); for flip_sign it is the sign of
// coefficient flip_coordinate, and direction is ignored. The working sign for
// a flip audit is fixed once from the full fit and never re-selected while
// rows are removed. k_max must not exceed n - p. For huber loss, huber
// supplies the iteration control while loss.tau carries the threshold;
// candidate_pool > 0 restricts each greedy step to that many candidates,
// preranked by the previous step's effects (0 means evaluate every row).
struct AuditQuery {
  Vector direction;
  std::size_t k_max = 0;
  AuditTarget target = AuditTarget::maximize_delta;
  std::size_t flip_coordinate = 0;
  LossSpec loss;
  HuberConfig huber;
  std::size_t candidate_pool = 0;
};

// Removal record. removed is in chronological order; delta_path[t] is the
// exact direction^T (beta_hat - beta_hat_subset) after t+1 removals; flip_at
// is the smallest number of removals after which the tracked coefficient's
// sign differs from the full fit's (absent when it never happens);
// achieved_delta is the final path entry, 0 for an empty path.
struct AuditTrace {
  std::vector<std::size_t> removed;
  Vector delta_path;
  std::optional<std::size_t> flip_at;
  double achieved_delta = 0.0;
  std::string method;
  std::uint64_t skipped_subsets = 0;
};

// Greedy removal: each step evaluates the exact effect of deleting every
// remaining candidate row (refitting for huber loss), removes the best one,
// breaking ties toward the lowest row index, and keeps removing the
// least-bad row even when no candidate improves the objective. Stops at
// k_max removals, or earlier once a flip audit flips. Throws RankCollapse
// when no admissible candidate remains.
AuditTrace one_greedy(const Dataset& data, const AuditQuery& query);

// Ranks rows once by first-order influence on the full fit, then removes the
// top k_max in rank order, recording exact refit deltas for every prefix.
// Squared loss only. A flip audit stops at the first flipping prefix.
AuditTrace amip_audit(const Dataset& data, const AuditQuery& query);

// Exact maximum over every subset of k_max removals, found by lexicographic
// enumeration with incremental downdating. Squared loss only. Requires
// C(n, k_max) <= enumeration_budget, else throws BudgetExceeded. Branches
// whose partial removal already collapses the design rank are pruned (their
// supersets collapse too) and counted in skipped_subsets. Ties go to the
// lexicographically first subset. removed is reported in ascending order and
// delta_path follows that order.
AuditTrace brute_force_delta(const Dataset& data, const AuditQuery& query,
                             std::uint64_t enumeration_budget = 2'000'000);

// Keep-set for the planted removal attack: drops the k rows with the largest
// products noise[i] * first_column[i], keeping the indices of the n - k
// smallest. Returned ascending.
std::vector<std::size_t> adversarial_subset(const Vector& noise, const Vector& first_column, std::size_t k);

}  // namespace lsq
