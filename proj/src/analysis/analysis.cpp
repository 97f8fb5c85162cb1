#include "advrl/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "advrl/errors.hpp"
#include "advrl/training/trainer.hpp"

namespace advrl::analysis {

using training::derive_seed;

void EvalProtocol::validate() const {
  if (env_seeds < 1 || episodes_per_seed < 1) throw ConfigError("protocol needs E >= 1 and K >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (attacker == attacks::ObjectiveTag::kCritic && !q) throw ConfigError("critic attacker needs a Q provider");
  budget.validate();
}

ReturnStats ReturnStats::from_returns(std::vector<double> returns) {
  ReturnStats s;
  s.returns = std::move(returns);
  if (s.returns.empty()) return s;
  if (std::all_of(s.returns.begin(), s.returns.end(), [&](double r) { return r == s.returns.front(); })) {
    s.mean = s.returns.front();
    return s;
  }
  double sum = 0.0;
  for (double r : s.returns) sum += r;
  s.mean = sum / static_cast<double>(s.returns.size());
  double var = 0.0;
  for (double r : s.returns) var += (r - s.mean) * (r - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(s.returns.size()));
  return s;
}

double run_episode(const policy::PolicyNet& pol, envs::Environment& env, std::uint64_t reset_seed,
                   const EvalProtocol& protocol, std::mt19937_64& action_rng, std::mt19937_64& attack_rng) {
  if (env.observation_dim() != pol.observation_dim() || env.action_count() != pol.action_count()) {
    throw LoadError("policy shape does not match environment '" + env.id() + "'");
  }
  auto obs = env.reset(reset_seed);
  const attacks::AttackObjective objective{protocol.attacker.value_or(attacks::ObjectiveTag::kCePgd), protocol.q};
  double total = 0.0;
  while (true) {
    std::vector<double> x = obs;
    if (protocol.attacker) {
      const auto delta = attacks::pgd_attack(pol, obs, objective, protocol.budget, attack_rng).delta;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = obs[i] + delta[i];
    }
    const auto d = policy::dist(pol, x);
    const std::size_t a = protocol.greedy ? d.argmax() : policy::sample(d, action_rng);
    const auto r = env.step(a);
    total += r.reward;
    if (r.done()) return total;
    obs = r.observation;
  }
}

ReturnStats evaluate(const std::vector<policy::PolicyNet>& models, const envs::Environment& env,
                     const EvalProtocol& protocol) {
  protocol.validate();
  if (models.empty()) throw UsageError("evaluate needs at least one model");
  const auto e = static_cast<std::size_t>(protocol.env_seeds);
  const auto k = static_cast<std::size_t>(protocol.episodes_per_seed);
  const std::size_t total = models.size() * e * k;
  std::vector<double> returns(total);
  auto work = [&](std::size_t begin, std::size_t stride) {
    auto local = env.clone();
    for (std::size_t idx = begin; idx < total; idx += stride) {
      const std::size_t m = idx / (e * k), s = (idx / k) % e, ep = idx % k;
      const std::uint64_t env_seed = derive_seed(protocol.seed, 10, s);
      std::mt19937_64 action_rng(derive_seed(env_seed, 11, m * k + ep));
      std::mt19937_64 attack_rng(derive_seed(env_seed, 12, m * k + ep));
      returns[idx] = run_episode(models[m], *local, derive_seed(env_seed, 13, ep), protocol, action_rng, attack_rng);
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(protocol.workers), total);
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
    for (auto& t : pool) t.join();
  }
  return ReturnStats::from_returns(std::move(returns));
}

std::vector<SweepRow> epsilon_sweep(const std::vector<policy::PolicyNet>& models, const envs::Environment& env,
                                    const std::vector<double>& epsilons, EvalProtocol protocol) {
  if (!std::is_sorted(epsilons.begin(), epsilons.end())) throw UsageError("epsilons must be ascending");
  protocol.attacker = attacks::ObjectiveTag::kCePgd;
  std::vector<SweepRow> rows;
  for (double eps : epsilons) {
    protocol.budget.epsilon = eps;
    protocol.budget.alpha = eps / 2.0;
    rows.push_back({eps, evaluate(models, env, protocol)});
  }
  return rows;
}

double KlLandscape::median() const {
  if (per_state_max.empty()) return 0.0;
  auto v = per_state_max;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::vector<std::pair<double, std::size_t>> KlLandscape::histogram(std::size_t bins) const {
  if (bins == 0) throw UsageError("histogram needs at least one bin");
  const double hi = per_state_max.empty() ? 0.0 : *std::max_element(per_state_max.begin(), per_state_max.end());
  const double width = hi > 0.0 ? hi / static_cast<double>(bins) : 1.0;
  std::vector<std::pair<double, std::size_t>> h(bins);
  for (std::size_t b = 0; b < bins; ++b) h[b].first = width * static_cast<double>(b);
  for (double v : per_state_max) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>(v / width));
    ++h[b].second;
  }
  return h;
}

KlLandscape kl_landscape(const policy::PolicyNet& pol, const std::vector<std::vector<double>>& states, int restarts,
                         attacks::PerturbationBudget budget, std::uint64_t seed) {
  if (restarts < 2) throw UsageError("the KL landscape needs at least two restarts");
  budget.init = attacks::Init::kUniform;
  const attacks::AttackObjective ce{attacks::ObjectiveTag::kCePgd, {}};
  KlLandscape out;
  out.restarts = restarts;
  out.steps = budget.steps;
  for (std::size_t s = 0; s < states.size(); ++s) {
    std::mt19937_64 rng(derive_seed(seed, 20, s));
    std::vector<policy::ActionDist> d;
    for (int r = 0; r < restarts; ++r) d.push_back(attacks::pgd_attack(pol, states[s], ce, budget, rng).perturbed_dist);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (i != j) worst = std::max(worst, policy::kl(d[i], d[j]));
      }
    }
    out.per_state_max.push_back(worst);
  }
  return out;
}

std::vector<std::vector<double>> sample_states(const policy::PolicyNet& pol, const envs::Environment& env,
                                               std::size_t count, std::uint64_t seed) {
  auto local = env.clone();
  std::vector<std::vector<double>> pool;
  std::mt19937_64 action_rng(derive_seed(seed, 30, 0));
  for (std::uint64_t episode = 0; pool.size() < count; ++episode) {
    auto obs = local->reset(derive_seed(seed, 31, episode));
    while (true) {
      pool.push_back(obs);
      const auto r = local->step(policy::sample(policy::dist(pol, obs), action_rng));
      if (r.done()) break;
      obs = r.observation;
    }
  }
  std::mt19937_64 pick(derive_seed(seed, 32, 0));
  std::shuffle(pool.begin(), pool.end(), pick);
  pool.resize(count);
  return pool;
}

nlohmann::json perturbation_dump(const policy::PolicyNet& pol, const std::vector<std::vector<double>>& states,
                                 const attacks::AttackObjective& objective, const attacks::PerturbationBudget& budget,
                                 std::uint64_t seed) {
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t s = 0; s < states.size(); ++s) {
    std::mt19937_64 rng(derive_seed(seed, 40, s));
    const auto out = attacks::pgd_attack(pol, states[s], objective, budget, rng);
    records.push_back(attacks::to_json(out, states[s], objective.tag, budget));
  }
  return records;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw UsageError("spearman needs two equally sized samples (n >= 2)");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<ReturnRow> to_rows(const ReturnStats& stats, const std::string& trainer, const std::string& attacker,
                               double epsilon, int env_seeds, int episodes_per_seed) {
  std::vector<ReturnRow> rows;
  const auto per_model = static_cast<std::size_t>(env_seeds * episodes_per_seed);
  for (std::size_t i = 0; i < stats.returns.size(); ++i) {
    rows.push_back({trainer, attacker, epsilon, static_cast<int>(i / per_model),
                    static_cast<int>((i / static_cast<std::size_t>(episodes_per_seed)) % static_cast<std::size_t>(env_seeds)),
                    static_cast<int>(i % static_cast<std::size_t>(episodes_per_seed)), stats.returns[i]});
  }
  return rows;
}

void write_returns_csv(std::ostream& out, const std::vector<ReturnRow>& rows) {
  std::ostringstream s;
  s.precision(17);
  s << "trainer,attacker,epsilon,model,env_seed,episode,return\n";
  for (const auto& r : rows) {
    s << r.trainer << ',' << r.attacker << ',' << r.epsilon << ',' << r.model << ',' << r.env_seed << ','
      << r.episode << ',' << r.value << '\n';
  }
  out << s.str();
}

}  // namespace advrl::analysis
