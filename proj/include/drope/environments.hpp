#pragma once

// Built-in environments and random model generators.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>

#include "drope/mdp.hpp"
#include "drope/rng.hpp"

namespace drope::envs {

// ---------------------------------------------------------------------------
// two_state: action 0 stays, action 1 flips; mu0 = (1, 0).
// ---------------------------------------------------------------------------

inline constexpr int kStay = 0;
inline constexpr int kFlip = 1;

inline TabularMDP two_state() {
  TabularMDP m = TabularMDP::zeros(2, 2);
  for (int s = 0; s < 2; ++s) {
    m.prob(s, kStay, s) = 1.0;
    m.prob(s, kFlip, 1 - s) = 1.0;
  }
  m.reward << 0.0, 0.5,
              1.0, 0.2;
  m.initial_dist << 1.0, 0.0;
  return m;
}

/// Policy choosing `flip` with the same probability in both states.
inline Policy flip_policy(double p_flip) {
  Matrix probs(2, 2);
  probs << 1.0 - p_flip, p_flip,
           1.0 - p_flip, p_flip;
  return Policy(std::move(probs));
}

// ---------------------------------------------------------------------------
// gridworld(n): pick up an item at cell (0,0) and deliver it to cell
// (n-1,n-1). State = (cell, carrying flag), 2 n^2 states; 4 move actions
// that slip to a uniformly random direction with probability `slip`.
// Delivering pays `delivery_reward`; mu0 is uniform over empty-handed cells.
// ---------------------------------------------------------------------------

struct GridworldOptions {
  double slip = 0.2;
  double delivery_reward = 10.0;
};

inline int gridworld_state(int n, int x, int y, int carrying) { return (carrying * n + y) * n + x; }

inline TabularMDP gridworld(int n, const GridworldOptions& opt = {}) {
  if (n < 2) throw std::invalid_argument("gridworld needs size >= 2");
  const int S = 2 * n * n;
  TabularMDP m = TabularMDP::zeros(S, 4);
  constexpr std::array<int, 4> dx{0, 0, -1, 1};
  constexpr std::array<int, 4> dy{-1, 1, 0, 0};
  for (int carrying = 0; carrying < 2; ++carrying) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const int s = gridworld_state(n, x, y, carrying);
        for (int a = 0; a < 4; ++a) {
          for (int dir = 0; dir < 4; ++dir) {
            const double p = (dir == a ? 1.0 - opt.slip : 0.0) + opt.slip / 4.0;
            const int nx = std::clamp(x + dx[dir], 0, n - 1);
            const int ny = std::clamp(y + dy[dir], 0, n - 1);
            int flag = carrying;
            double r = 0.0;
            if (nx == 0 && ny == 0) flag = 1;
            if (nx == n - 1 && ny == n - 1 && carrying == 1) {
              flag = 0;
              r = opt.delivery_reward;
            }
            m.prob(s, a, gridworld_state(n, nx, ny, flag)) += p;
            m.reward(s, a) += p * r;
          }
        }
        if (carrying == 0) m.initial_dist[s] = 1.0 / (n * n);
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// taxi_mini(k): a k x k taxi grid with four depots at the corners.
// State = (taxi cell, passenger location in {4 depots, in taxi},
// destination depot), k^2 * 5 * 4 states; actions S, N, E, W, pickup,
// dropoff. A successful dropoff pays +20 and spawns a new passenger at a
// random depot with a random different destination; illegal pickup/dropoff
// costs -10, every other step -1.
// ---------------------------------------------------------------------------

inline constexpr int kTaxiPassengerLocations = 5;
inline constexpr int kTaxiDepots = 4;

inline int taxi_state_count(int k) { return k * k * kTaxiPassengerLocations * kTaxiDepots; }

inline TabularMDP taxi_mini(int k, int* enumerated_states = nullptr) {
  if (k < 2) throw std::invalid_argument("taxi_mini needs size >= 2");
  const std::array<std::pair<int, int>, kTaxiDepots> depots{
      std::pair{0, 0}, std::pair{k - 1, 0}, std::pair{0, k - 1}, std::pair{k - 1, k - 1}};
  auto index = [k](int x, int y, int passenger, int dest) {
    return ((dest * kTaxiPassengerLocations + passenger) * k + y) * k + x;
  };
  const int S = taxi_state_count(k);
  TabularMDP m = TabularMDP::zeros(S, 6);
  int count = 0;
  for (int dest = 0; dest < kTaxiDepots; ++dest) {
    for (int passenger = 0; passenger < kTaxiPassengerLocations; ++passenger) {
      for (int y = 0; y < k; ++y) {
        for (int x = 0; x < k; ++x) {
          const int s = index(x, y, passenger, dest);
          ++count;
          constexpr std::array<int, 4> dx{0, 0, 1, -1};
          constexpr std::array<int, 4> dy{1, -1, 0, 0};
          for (int a = 0; a < 4; ++a) {
            const int nx = std::clamp(x + dx[a], 0, k - 1);
            const int ny = std::clamp(y + dy[a], 0, k - 1);
            m.prob(s, a, index(nx, ny, passenger, dest)) = 1.0;
            m.reward(s, a) = -1.0;
          }
          // pickup
          const bool at_passenger =
              passenger < kTaxiDepots && depots[passenger] == std::pair{x, y};
          if (at_passenger) {
            m.prob(s, 4, index(x, y, kTaxiDepots, dest)) = 1.0;
            m.reward(s, 4) = -1.0;
          } else {
            m.prob(s, 4, s) = 1.0;
            m.reward(s, 4) = -10.0;
          }
          // dropoff
          const bool delivering = passenger == kTaxiDepots && depots[dest] == std::pair{x, y};
          if (delivering) {
            const double p = 1.0 / (kTaxiDepots * (kTaxiDepots - 1));
            for (int np = 0; np < kTaxiDepots; ++np) {
              for (int nd = 0; nd < kTaxiDepots; ++nd) {
                if (nd != np) m.prob(s, 5, index(x, y, np, nd)) += p;
              }
            }
            m.reward(s, 5) = 20.0;
          } else {
            m.prob(s, 5, s) = 1.0;
            m.reward(s, 5) = -10.0;
          }
          if (passenger < kTaxiDepots && passenger != dest) {
            m.initial_dist[s] = 1.0;
          }
        }
      }
    }
  }
  m.initial_dist /= m.initial_dist.sum();
  if (enumerated_states) *enumerated_states = count;
  return m;
}

// ---------------------------------------------------------------------------
// Random models for identity checks: Dirichlet(1) rows, rewards U[0,1].
// ---------------------------------------------------------------------------

inline Vector dirichlet_ones(int k, Rng& rng) {
  Vector x(k);
  for (int i = 0; i < k; ++i) x[i] = rng.exponential();
  return x / x.sum();
}

inline TabularMDP random_mdp(int num_states, int num_actions, Rng& rng) {
  TabularMDP m = TabularMDP::zeros(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      m.transition[a].row(s) = dirichlet_ones(num_states, rng).transpose();
      m.reward(s, a) = rng.uniform();
    }
  }
  m.initial_dist = dirichlet_ones(num_states, rng);
  return m;
}

inline Policy random_policy(int num_states, int num_actions, Rng& rng) {
  Matrix p(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) p.row(s) = dirichlet_ones(num_actions, rng).transpose();
  return Policy(std::move(p));
}

inline Vector random_vector(int n, double lo, double hi, Rng& rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

/// Names accepted by make-env.
inline bool is_builtin(const std::string& name) {
  return name == "two_state" || name == "gridworld" || name == "taxi_mini";
}

inline TabularMDP builtin(const std::string& name, int size) {
  if (name == "two_state") return two_state();
  if (name == "gridworld") return gridworld(size);
  if (name == "taxi_mini") return taxi_mini(size);
  throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace drope::envs
