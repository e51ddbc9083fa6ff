#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pphpc/config.hpp"
#include "pphpc/prng.hpp"
#include "pphpc/scheduling.hpp"

namespace pphpc {

struct AgentId {
  std::uint32_t worker = 0;
  std::uint32_t serial = 0;
  friend auto operator<=>(const AgentId&, const AgentId&) = default;
};

// Per-worker agent id counter.
class IdSource {
 public:
  explicit IdSource(std::uint32_t worker = 0) : worker_(worker) {}
  AgentId next() { return {worker_, serial_++}; }
  std::uint32_t issued() const { return serial_; }

 private:
  std::uint32_t worker_;
  std::uint32_t serial_ = 0;
};

// Sort key for ordered insertion. It names where an agent came from in the
// current phase: (iteration, source, index). Initial placement uses
// iteration 0 with source = kind and index = creation token; a move uses the
// source cell token and the agent's position in that cell's mover list. A
// single worker visiting tokens in ascending order inserts agents in exactly
// this order, so ordered and plain insertion agree when N = 1.
struct PlacementKey {
  std::uint32_t iter = 0;
  std::uint32_t source = 0;
  std::uint32_t index = 0;
  friend auto operator<=>(const PlacementKey&, const PlacementKey&) = default;
};

inline constexpr std::int32_t kNeverMoved = -1;

struct Agent {
  AgentId id;
  PlacementKey key;
  std::int32_t energy = 0;
  std::int32_t last_moved_iter = kNeverMoved;
  AgentKind kind = AgentKind::Prey;
  bool alive = true;

  friend bool operator==(const Agent&, const Agent&) = default;
};

enum class Direction : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };
inline constexpr std::uint32_t kDirections = 5;

struct Cell {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t countdown = 0;
  std::vector<Agent> agents;
  // Tokens of the Von Neumann neighbours, indexed by Direction (Stay = self).
  std::array<std::uint32_t, kDirections> neighbors{};
};

// Per-cell mutual exclusion for agent insertion.
class CellLock {
 public:
  void lock() {
    while (flag_.test_and_set(std::memory_order_acquire)) flag_.wait(true, std::memory_order_relaxed);
  }
  void unlock() {
    flag_.clear(std::memory_order_release);
    flag_.notify_one();
  }

 private:
  std::atomic_flag flag_;
};

/// Toroidal grid of cells stored row-major; token t ↔ (t mod x_env, t div x_env).
class Environment {
 public:
  Environment(std::int32_t x_env, std::int32_t y_env)
      : x_env_(x_env), y_env_(y_env), cells_(static_cast<std::size_t>(std::int64_t{x_env} * y_env)),
        locks_(std::make_unique<CellLock[]>(cells_.size())) {
    if (x_env < 1 || y_env < 1) throw config_error("grid dimensions must be positive");
  }

  std::int32_t x_env() const { return x_env_; }
  std::int32_t y_env() const { return y_env_; }
  std::int64_t size() const { return static_cast<std::int64_t>(cells_.size()); }

  std::uint32_t token_of(std::int32_t x, std::int32_t y) const {
    return static_cast<std::uint32_t>(std::int64_t{y} * x_env_ + x);
  }

  void check_token(std::int64_t token) const {
    if (token < 0 || token >= size())
      throw std::out_of_range("work token " + std::to_string(token) + " outside [0, " + std::to_string(size()) + ")");
  }

  Cell& cell(std::int64_t token) { return cells_[static_cast<std::size_t>(token)]; }
  const Cell& cell(std::int64_t token) const { return cells_[static_cast<std::size_t>(token)]; }
  CellLock& lock(std::int64_t token) { return locks_[static_cast<std::size_t>(token)]; }

  std::uint32_t neighbor_token(std::int64_t token, Direction d) const {
    const std::int32_t x = static_cast<std::int32_t>(token % x_env_);
    const std::int32_t y = static_cast<std::int32_t>(token / x_env_);
    switch (d) {
      case Direction::Up: return token_of(x, (y + y_env_ - 1) % y_env_);
      case Direction::Down: return token_of(x, (y + 1) % y_env_);
      case Direction::Left: return token_of((x + x_env_ - 1) % x_env_, y);
      case Direction::Right: return token_of((x + 1) % x_env_, y);
      case Direction::Stay: return static_cast<std::uint32_t>(token);
    }
    return static_cast<std::uint32_t>(token);
  }

  // SetCellNeighbors for one token.
  void link_neighbors(std::int64_t token) {
    Cell& c = cell(token);
    for (std::uint32_t d = 0; d < kDirections; ++d) c.neighbors[d] = neighbor_token(token, static_cast<Direction>(d));
  }

  std::vector<Cell>& cells() { return cells_; }
  const std::vector<Cell>& cells() const { return cells_; }

 private:
  std::int32_t x_env_;
  std::int32_t y_env_;
  std::vector<Cell> cells_;
  std::unique_ptr<CellLock[]> locks_;
};

// ---------------------------------------------------------------------------
// Processes

/// Initialize cell `token`: food available with probability 1/2, otherwise
/// the countdown is uniform on 1..c_r. Draws availability first.
template <class Generator>
void init_cell(Environment& env, std::int64_t token, Generator& rng, const DynamicsParams& params) {
  env.check_token(token);
  Cell& c = env.cell(token);
  c.x = static_cast<std::int32_t>(token % env.x_env());
  c.y = static_cast<std::int32_t>(token / env.x_env());
  const bool available = draw(rng, 2) == 0;
  c.countdown = available ? 0 : 1 + static_cast<std::int32_t>(draw(rng, static_cast<std::uint32_t>(params.cell_restart)));
}

/// New agent with energy uniform on 1..2g.
template <class Generator>
Agent create_agent(AgentKind kind, AgentId id, Generator& rng, const DynamicsParams& params) {
  const std::int32_t g = params.gain(kind);
  if (g < 1)
    throw config_error(std::string("cannot create ") + to_string(kind) + ": energy gain is 0, initial energy range empty");
  Agent a;
  a.id = id;
  a.kind = kind;
  a.energy = 1 + static_cast<std::int32_t>(draw(rng, static_cast<std::uint32_t>(2 * g)));
  a.last_moved_iter = kNeverMoved;
  return a;
}

/// Insert `agent` into `cell` under the given cell-level policy. The caller
/// holds the lock when `sync` is not None.
inline void insert_unlocked(Cell& cell, Agent&& agent, CellSync sync) {
  if (sync == CellSync::Ordered) {
    auto& list = cell.agents;
    auto pos = list.end();
    while (pos != list.begin() && std::prev(pos)->key > agent.key) --pos;
    list.insert(pos, std::move(agent));
  } else {
    cell.agents.push_back(std::move(agent));
  }
}

inline void insert_agent(Environment& env, std::int64_t token, Agent&& agent, CellSync sync) {
  if (sync == CellSync::None) {
    insert_unlocked(env.cell(token), std::move(agent), sync);
    return;
  }
  CellLock& l = env.lock(token);
  l.lock();
  insert_unlocked(env.cell(token), std::move(agent), sync);
  l.unlock();
}

/// Ordered variant used by the EX and ER strategies: the cell list stays
/// sorted by PlacementKey regardless of arrival order.
inline void insert_agent_ordered(Environment& env, std::int64_t token, Agent&& agent) {
  insert_agent(env, token, std::move(agent), CellSync::Ordered);
}

/// Create the agent behind AP token `token` of `kind` and place it in a
/// uniformly random cell. Energy is drawn before the cell.
template <class Generator>
void place_initial_agent(Environment& env, AgentKind kind, std::int64_t token, Generator& rng, IdSource& ids,
                         const DynamicsParams& params, CellSync sync) {
  Agent a = create_agent(kind, ids.next(), rng, params);
  a.key = {0, static_cast<std::uint32_t>(kind), static_cast<std::uint32_t>(token)};
  const std::uint32_t dest = draw(rng, static_cast<std::uint32_t>(env.size()));
  insert_agent(env, dest, std::move(a), sync);
}

/// Sequential placement of `count` agents, tokens 0..count-1.
template <class Generator>
void place_initial_agents(Environment& env, AgentKind kind, std::int64_t count, Generator& rng, IdSource& ids,
                          const DynamicsParams& params, CellSync sync = CellSync::None) {
  for (std::int64_t t = 0; t < count; ++t) place_initial_agent(env, kind, t, rng, ids, params, sync);
}

/// Move one agent out of the cell at `token`. Draws the direction, charges
/// the energy loss (also when staying) and stamps the iteration. Returns the
/// destination token, or nothing if the agent died.
template <class Generator>
std::optional<std::uint32_t> move_agent(Agent& agent, const Cell& cell, std::int32_t iter, Generator& rng,
                                        const DynamicsParams& params) {
  if (!agent.alive) throw std::logic_error("move_agent: agent is dead");
  if (agent.last_moved_iter >= iter) throw std::logic_error("move_agent: agent already moved this iteration");
  const std::uint32_t d = draw(rng, kDirections);
  agent.energy -= params.loss(agent.kind);
  agent.last_moved_iter = iter;
  if (agent.energy <= 0) {
    agent.alive = false;
    return std::nullopt;
  }
  return cell.neighbors[d];
}

/// Food regrowth: the countdown decreases until it reaches 0.
inline void grow_food(Cell& cell) {
  if (cell.countdown > 0) --cell.countdown;
}

/// Eat: prey take available cell food; predators kill the first live prey in
/// the cell's current order.
inline bool try_eat(Agent& agent, Cell& cell, const DynamicsParams& params) {
  if (agent.kind == AgentKind::Prey) {
    if (cell.countdown != 0) return false;
    agent.energy += params.gain_prey;
    cell.countdown = params.cell_restart;
    return true;
  }
  for (Agent& other : cell.agents) {
    if (other.alive && other.kind == AgentKind::Prey) {
      other.alive = false;
      agent.energy += params.gain_predator;
      return true;
    }
  }
  return false;
}

/// Reproduce with probability r_P once energy exceeds r_T. The threshold is
/// checked before drawing; the child takes floor(E/2).
template <class Generator>
std::optional<Agent> try_reproduce(Agent& agent, std::int32_t iter, Generator& rng, const DynamicsParams& params,
                                   IdSource& ids) {
  if (agent.energy <= params.repro_threshold(agent.kind)) return std::nullopt;
  if (draw(rng, 100) >= static_cast<std::uint32_t>(params.repro_prob(agent.kind))) return std::nullopt;
  Agent child;
  child.id = ids.next();
  child.kind = agent.kind;
  child.energy = agent.energy / 2;
  agent.energy -= child.energy;
  child.last_moved_iter = iter;
  child.key = {static_cast<std::uint32_t>(iter), 0, 0};
  return child;
}

/// Fisher-Yates shuffle driven by bounded draws (i from n-1 down to 1).
template <class Generator, class T>
void shuffle(std::vector<T>& items, Generator& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = draw(rng, static_cast<std::uint32_t>(i));
    if (j != i - 1) std::swap(items[i - 1], items[j]);
  }
}

/// Act phase for one cell: shuffle, then each agent present at the start eats
/// and reproduces. Newborns are appended and do not act. Dead agents are
/// removed on exit.
template <class Generator>
void act_cell(Cell& cell, std::int32_t iter, Generator& rng, const DynamicsParams& params, IdSource& ids) {
  auto& list = cell.agents;
  shuffle(list, rng);
  const std::size_t acting = list.size();
  for (std::size_t i = 0; i < acting; ++i) {
    if (!list[i].alive) continue;
    try_eat(list[i], cell, params);
    if (auto child = try_reproduce(list[i], iter, rng, params, ids)) list.push_back(*child);
  }
  std::erase_if(list, [](const Agent& a) { return !a.alive; });
}

}  // namespace pphpc
