#include "advrl/training/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "advrl/attacks/attacks.hpp"
#include "advrl/errors.hpp"

namespace advrl::training {

namespace {

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

void rng_load(std::mt19937_64& rng, const std::string& text) {
  std::istringstream s(text);
  s >> rng;
  if (!s) throw LoadError("corrupt RNG state in checkpoint");
}

std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ stream) ^ index);
}

double anneal(double base, std::int64_t step, std::int64_t total) {
  const double beta = 1.0 - static_cast<double>(step) / static_cast<double>(total);
  return base * std::max(beta, 0.0);
}

void write_metrics_header(std::ostream& out) {
  out << "iteration,step,episodes,mean_return,value_loss,surrogate,approx_kl,clip_fraction,entropy,"
         "restart_max_kl,learning_rate,clip,attacked_fraction\n";
}

void write_metrics_row(std::ostream& out, const IterationMetrics& m) {
  std::ostringstream s;
  s << std::setprecision(17) << m.iteration << ',' << m.step << ',' << m.episodes << ',' << m.mean_return << ','
    << m.value_loss << ',' << m.surrogate << ',' << m.approx_kl << ',' << m.clip_fraction << ',' << m.entropy << ','
    << m.restart_max_kl << ',' << m.learning_rate << ',' << m.clip << ',' << m.attacked_fraction << '\n';
  out << s.str();
}

Trainer::Trainer(const envs::Environment& prototype, TrainConfig cfg)
    : cfg_(std::move(cfg)), env_id_(prototype.id()), env_params_(prototype.params()) {
  cfg_.validate();
  std::mt19937_64 init(derive_seed(cfg_.seed, 0, 0));
  policy_ = policy::make_policy_net(prototype.observation_dim(), prototype.action_count(), cfg_.net, init,
                                    cfg_.policy_output_gain);
  value_ = policy::make_value_net(prototype.observation_dim(), cfg_.net, init);
  opt_ = Optimizer(cfg_.optimizer, policy_.mlp.parameter_count() + value_.mlp.parameter_count(), cfg_.adam_beta1,
                   cfg_.adam_beta2, cfg_.adam_epsilon);
  update_rng_.seed(derive_seed(cfg_.seed, 1, 0));
  actors_.resize(static_cast<std::size_t>(cfg_.actors));
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    Actor& a = actors_[i];
    a.env = prototype.clone();
    a.action_rng.seed(derive_seed(cfg_.seed, 2, i));
    a.attack_rng.seed(derive_seed(cfg_.seed, 3, i));
    a.bernoulli_rng.seed(derive_seed(cfg_.seed, 4, i));
    start_episode(a, i);
  }
}

void Trainer::start_episode(Actor& a, std::size_t index) {
  a.obs = a.env->reset(derive_seed(cfg_.seed, 100 + index, a.episodes_started));
  ++a.episodes_started;
  a.episode_return = 0.0;
  a.episode_length = 0;
}

std::optional<std::int64_t> Trainer::attack_start_step() const {
  switch (cfg_.trainer) {
    case TrainerTag::kStandard: return std::nullopt;
    case TrainerTag::kAtpa:
    case TrainerTag::kDataAugment: return 0;
    case TrainerTag::kStageWise:
      return std::llround(cfg_.stagewise_pretrain_fraction * static_cast<double>(cfg_.total_steps));
  }
  return std::nullopt;
}

double Trainer::perturbation_probability(std::int64_t global_step) const {
  return cfg_.dataaugment_phi_max *
         std::min(1.0, static_cast<double>(global_step) / static_cast<double>(cfg_.total_steps));
}

bool Trainer::attack_step(Actor& a, std::int64_t global_step) {
  switch (cfg_.trainer) {
    case TrainerTag::kStandard: return false;
    case TrainerTag::kAtpa: return true;
    case TrainerTag::kStageWise: return global_step >= *attack_start_step();
    case TrainerTag::kDataAugment: {
      const double phi = perturbation_probability(global_step);
      if (phi <= 0.0) return false;
      return std::uniform_real_distribution<double>(0.0, 1.0)(a.bernoulli_rng) < phi;
    }
  }
  return false;
}

Trajectory Trainer::collect(Actor& a, std::size_t index, std::vector<EpisodeRecord>& finished) {
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(cfg_.horizon));
  const attacks::AttackObjective ce{attacks::ObjectiveTag::kCePgd, {}};
  const std::vector<double> zeros(a.obs.size(), 0.0);
  for (int t = 0; t < cfg_.horizon; ++t) {
    const std::int64_t global = step_ + static_cast<std::int64_t>(t) * cfg_.actors + static_cast<std::int64_t>(index);
    StepRecord rec;
    rec.clean_obs = a.obs;
    rec.attacked = attack_step(a, global);
    rec.delta = rec.attacked ? attacks::pgd_attack(policy_, a.obs, ce, cfg_.budget, a.attack_rng).delta : zeros;
    rec.perturbed_obs = add(rec.clean_obs, rec.delta);
    const auto d = policy::dist(policy_, rec.perturbed_obs);
    rec.action = policy::sample(d, a.action_rng);
    rec.log_prob_old = d.log_probabilities[rec.action];
    rec.value = policy::value(value_, rec.perturbed_obs);

    const auto res = a.env->step(rec.action);
    rec.reward = res.reward;
    rec.terminated = res.terminated;
    rec.truncated = res.truncated && !res.terminated;
    a.episode_return += res.reward;
    ++a.episode_length;
    if (res.done()) {
      if (rec.truncated) rec.bootstrap_value = policy::value(value_, res.observation);
      finished.push_back({global + 1, static_cast<int>(index), a.episode_return, a.episode_length});
      start_episode(a, index);
    } else {
      a.obs = res.observation;
      if (t + 1 == cfg_.horizon) rec.bootstrap_value = policy::value(value_, a.obs);
    }
    traj.steps.push_back(std::move(rec));
  }
  return traj;
}

double Trainer::restart_kl(double epsilon) const {
  if (cfg_.kl_diag_states == 0 || epsilon == 0.0) return 0.0;
  std::vector<const std::vector<double>*> states;
  for (const auto& tr : batch_) {
    for (const auto& s : tr.steps) states.push_back(&s.clean_obs);
  }
  std::mt19937_64 rng(derive_seed(cfg_.seed, 6, static_cast<std::uint64_t>(iteration_)));
  auto budget = cfg_.budget;
  budget.init = attacks::Init::kUniform;
  const attacks::AttackObjective ce{attacks::ObjectiveTag::kCePgd, {}};
  const auto count = static_cast<std::size_t>(cfg_.kl_diag_states);
  double worst = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const auto& obs = *states[k * states.size() / count];
    std::vector<policy::ActionDist> d;
    for (int r = 0; r < cfg_.kl_diag_restarts; ++r) {
      d.push_back(attacks::pgd_attack(policy_, obs, ce, budget, rng).perturbed_dist);
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (i != j) worst = std::max(worst, policy::kl(d[i], d[j]));
      }
    }
  }
  return worst;
}

const IterationMetrics& Trainer::iterate() {
  if (finished()) throw UsageError("training already reached total_steps");
  const double lr = cfg_.anneal ? anneal(cfg_.learning_rate, step_, cfg_.total_steps) : cfg_.learning_rate;
  const double clip = cfg_.anneal ? anneal(cfg_.clip, step_, cfg_.total_steps) : cfg_.clip;

  const std::size_t n = actors_.size();
  batch_.assign(n, {});
  std::vector<std::vector<EpisodeRecord>> done(n);
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg_.workers), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) batch_[i] = collect(actors_[i], i, done[i]);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) batch_[i] = collect(actors_[i], i, done[i]);
      });
    }
    for (auto& t : pool) t.join();
  }

  IterationMetrics m;
  std::size_t attacked = 0, total = 0;
  for (const auto& tr : batch_) {
    for (const auto& s : tr.steps) {
      attacked += s.attacked && cfg_.budget.epsilon > 0.0 ? 1 : 0;
      ++total;
    }
  }
  m.attacked_fraction = static_cast<double>(attacked) / static_cast<double>(total);
  m.restart_max_kl = restart_kl(attacked > 0 ? cfg_.budget.epsilon : 0.0);

  const auto diag = ppo_update(policy_, value_, opt_, batch_, cfg_, lr, clip, update_rng_);
  step_ += cfg_.steps_per_iteration();
  ++iteration_;

  double sum = 0.0;
  for (const auto& per_actor : done) {
    for (const auto& e : per_actor) {
      episodes_.push_back(e);
      sum += e.total_return;
      ++m.episodes;
    }
  }
  m.iteration = iteration_;
  m.step = step_;
  m.mean_return = m.episodes > 0 ? sum / m.episodes : std::numeric_limits<double>::quiet_NaN();
  m.value_loss = diag.value_loss;
  m.surrogate = diag.surrogate;
  m.approx_kl = diag.approx_kl;
  m.clip_fraction = diag.clip_fraction;
  m.entropy = diag.entropy;
  m.learning_rate = lr;
  m.clip = clip;
  metrics_.push_back(m);
  return metrics_.back();
}

void Trainer::run(const std::string& checkpoint_dir,
                  const std::function<void(const Trainer&, const IterationMetrics&)>& on_iteration) {
  if (!checkpoint_dir.empty()) std::filesystem::create_directories(checkpoint_dir);
  auto path_for = [&](std::int64_t step) {
    return (std::filesystem::path(checkpoint_dir) / ("ckpt_" + std::to_string(step) + ".bin")).string();
  };
  bool saved_last = false;
  while (!finished()) {
    const auto& m = iterate();
    if (on_iteration) on_iteration(*this, m);
    saved_last = false;
    if (!checkpoint_dir.empty() && cfg_.checkpoint_every > 0 && iteration_ % cfg_.checkpoint_every == 0) {
      save(path_for(step_));
      saved_last = true;
    }
  }
  if (!checkpoint_dir.empty() && !saved_last) save(path_for(step_));
}

io::Checkpoint Trainer::checkpoint() const {
  io::Checkpoint c;
  c.meta["kind"] = "advrl-trainer";
  c.meta["env"] = {{"id", env_id_}, {"params", env_params_}};
  c.meta["step"] = step_;
  c.meta["iteration"] = iteration_;
  c.meta["optimizer"] = {{"tag", to_string(opt_.tag())}, {"count", opt_.count()}};
  c.meta["update_rng"] = rng_text(update_rng_);
  nlohmann::json actors = nlohmann::json::array();
  for (const auto& a : actors_) {
    actors.push_back({{"env_state", a.env->save_state()},
                      {"obs", a.obs},
                      {"episode_return", a.episode_return},
                      {"episode_length", a.episode_length},
                      {"episodes_started", a.episodes_started},
                      {"action_rng", rng_text(a.action_rng)},
                      {"attack_rng", rng_text(a.attack_rng)},
                      {"bernoulli_rng", rng_text(a.bernoulli_rng)}});
  }
  c.meta["actors"] = actors;
  io::add_mlp(c, "policy", policy_.mlp);
  io::add_mlp(c, "value", value_.mlp);
  if (opt_.tag() == OptimizerTag::kAdam) {
    c.add("optimizer.m", {opt_.first_moment().size()}, opt_.first_moment());
    c.add("optimizer.v", {opt_.second_moment().size()}, opt_.second_moment());
  }
  return c;
}

void Trainer::save(const std::string& path) const { io::write_checkpoint(path, checkpoint()); }

Trainer Trainer::resume(const std::string& path, const envs::Environment& prototype, TrainConfig cfg) {
  const auto c = io::read_checkpoint(path);
  if (c.meta.value("kind", "") != "advrl-trainer") throw LoadError(path + ": not a trainer checkpoint");
  Trainer t(prototype, std::move(cfg));
  try {
    if (c.meta.at("env").at("id") != t.env_id_) throw LoadError(path + ": environment mismatch");
    const auto& actors = c.meta.at("actors");
    if (actors.size() != t.actors_.size()) throw LoadError(path + ": actor count differs from the config");
    if (c.meta.at("optimizer").at("tag") != to_string(t.cfg_.optimizer)) {
      throw LoadError(path + ": optimizer differs from the config");
    }
    const auto pol = io::read_mlp(c, "policy");
    const auto val = io::read_mlp(c, "value");
    if (pol.parameter_count() != t.policy_.mlp.parameter_count() ||
        val.parameter_count() != t.value_.mlp.parameter_count()) {
      throw LoadError(path + ": network architecture differs from the config");
    }
    t.policy_.mlp = pol;
    t.value_.mlp = val;
    t.step_ = c.meta.at("step").get<std::int64_t>();
    t.iteration_ = c.meta.at("iteration").get<std::int64_t>();
    t.opt_.set_count(c.meta.at("optimizer").at("count").get<std::int64_t>());
    if (t.cfg_.optimizer == OptimizerTag::kAdam) {
      t.opt_.first_moment() = c.block("optimizer.m").values;
      t.opt_.second_moment() = c.block("optimizer.v").values;
    }
    rng_load(t.update_rng_, c.meta.at("update_rng").get<std::string>());
    for (std::size_t i = 0; i < t.actors_.size(); ++i) {
      const auto& j = actors[i];
      Actor& a = t.actors_[i];
      a.env->load_state(j.at("env_state"));
      a.obs = j.at("obs").get<std::vector<double>>();
      a.episode_return = j.at("episode_return").get<double>();
      a.episode_length = j.at("episode_length").get<int>();
      a.episodes_started = j.at("episodes_started").get<std::uint64_t>();
      rng_load(a.action_rng, j.at("action_rng").get<std::string>());
      rng_load(a.attack_rng, j.at("attack_rng").get<std::string>());
      rng_load(a.bernoulli_rng, j.at("bernoulli_rng").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": malformed trainer state: " + e.what());
  }
  return t;
}

TrainResult train(const envs::Environment& env, const TrainConfig& cfg, const std::string& checkpoint_dir) {
  Trainer t(env, cfg);
  t.run(checkpoint_dir);
  return {t.policy(), t.value(), t.metrics(), t.episodes(), t.attack_start_step()};
}

TrainResult train_standard(const envs::Environment& env, TrainConfig cfg) {
  cfg.trainer = TrainerTag::kStandard;
  return train(env, cfg);
}

TrainResult train_atpa(const envs::Environment& env, TrainConfig cfg) {
  cfg.trainer = TrainerTag::kAtpa;
  return train(env, cfg);
}

TrainResult train_stagewise(const envs::Environment& env, TrainConfig cfg) {
  cfg.trainer = TrainerTag::kStageWise;
  return train(env, cfg);
}

TrainResult train_dataaugment(const envs::Environment& env, TrainConfig cfg) {
  cfg.trainer = TrainerTag::kDataAugment;
  return train(env, cfg);
}

policy::PolicyNet load_policy(const std::string& path) { return {io::read_mlp(io::read_checkpoint(path), "policy")}; }

policy::ValueNet load_value(const std::string& path) { return {io::read_mlp(io::read_checkpoint(path), "value")}; }

}  // namespace advrl::training
