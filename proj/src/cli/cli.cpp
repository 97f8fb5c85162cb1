#include "advrl/cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>

#include <CLI11.hpp>

#include "advrl/analysis/analysis.hpp"
#include "advrl/attacks/attacks.hpp"
#include "advrl/envs/builtin.hpp"
#include "advrl/errors.hpp"
#include "advrl/exact/solvers.hpp"
#include "advrl/io/checkpoint.hpp"
#include "advrl/io/json_fields.hpp"
#include "advrl/training/config.hpp"
#include "advrl/training/trainer.hpp"

namespace advrl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

LoadedModel load_model(const std::string& path) {
  const auto c = io::read_checkpoint(path);
  if (c.meta.value("kind", "") != "advrl-trainer") throw LoadError(path + ": not a trainer checkpoint");
  LoadedModel m;
  m.policy.mlp = io::read_mlp(c, "policy");
  if (!c.meta.contains("env")) throw LoadError(path + ": checkpoint has no environment record");
  m.env = c.meta.at("env");
  return m;
}

namespace {

// Layered configuration: struct defaults, then the config file, then flags.
struct Layers {
  json file = json::object();
  json flags = json::object();

  const json* get(const json& doc, const char* key) const {
    return doc.contains(key) ? &doc.at(key) : nullptr;
  }
  template <class T, class Parse>
  T block(const char* key, T value, Parse parse) const {
    if (const auto* f = get(file, key)) value = parse(*f, value);
    if (const auto* g = get(flags, key)) value = parse(*g, value);
    return value;
  }
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void log_sources(std::ostream& err, const json& resolved, const Layers& layers) {
  const auto flat = resolved.flatten();
  const auto file = layers.file.flatten();
  const auto flags = layers.flags.flatten();
  std::size_t defaults = 0;
  for (const auto& [path, value] : flat.items()) {
    const char* source = flags.contains(path) ? "flag" : file.contains(path) ? "file" : nullptr;
    if (!source) {
      ++defaults;
      continue;
    }
    err << "advrl: " << path << " = " << value.dump() << " (" << source << ")\n";
  }
  err << "advrl: " << defaults << " settings from defaults (precedence: flags > file > defaults)\n";
}

fs::path resolve_output(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv(kOutputRootVar); root && *root) p = fs::path(root) / p;
  }
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << text;
}

struct EnvChoice {
  std::unique_ptr<envs::Environment> env;
  json resolved;
};

EnvChoice resolve_env(const Layers& layers, const json& fallback) {
  json id = fallback.at("id");
  json params = fallback.value("params", json::object());
  for (const json* layer : {layers.get(layers.file, "env"), layers.get(layers.flags, "env")}) {
    if (!layer) continue;
    io::reject_unknown_keys(*layer, {"id", "params"}, "env");
    if (layer->contains("id") && layer->at("id") != id) {
      id = layer->at("id");
      params = json::object();
    }
    if (layer->contains("params")) params.merge_patch(layer->at("params"));
  }
  if (!id.is_string()) throw ConfigError("env.id must be a string");
  EnvChoice c;
  c.env = envs::make_environment(id.get<std::string>(), params);
  c.resolved = {{"id", c.env->id()}, {"params", c.env->params()}};
  return c;
}

std::vector<std::string> resolve_models(const Layers& layers) {
  std::vector<std::string> models;
  io::read_field(layers.file, "models", models, "config");
  io::read_field(layers.flags, "models", models, "flags");
  return models;
}

std::vector<LoadedModel> load_models(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("at least one model checkpoint is required (--model)");
  std::vector<LoadedModel> out;
  for (const auto& p : paths) out.push_back(load_model(p));
  return out;
}

std::vector<policy::PolicyNet> policies(const std::vector<LoadedModel>& models) {
  std::vector<policy::PolicyNet> out;
  for (const auto& m : models) out.push_back(m.policy);
  return out;
}

json default_env(const std::vector<LoadedModel>& models, const char* id) {
  if (!models.empty()) return models.front().env;
  return {{"id", id}, {"params", json::object()}};
}

attacks::QProvider exact_q(const envs::Environment& env) {
  const auto mdp = env.enumerate();
  if (!mdp) throw ConfigError("the critic objective needs an enumerable environment; '" + env.id() + "' is not");
  const auto vi = exact::value_iteration(*mdp, 1e-10);
  return attacks::table_q_provider(*mdp, vi.q);
}

// eval block

json to_json(const analysis::EvalProtocol& p) {
  return {{"env_seeds", p.env_seeds},
          {"episodes_per_seed", p.episodes_per_seed},
          {"attacker", p.attacker ? attacks::to_string(*p.attacker) : "none"},
          {"budget", training::to_json(p.budget)},
          {"greedy", p.greedy},
          {"seed", p.seed},
          {"workers", p.workers}};
}

analysis::EvalProtocol parse_eval(const json& j, analysis::EvalProtocol p) {
  const std::string where = "eval";
  io::reject_unknown_keys(j, {"env_seeds", "episodes_per_seed", "attacker", "budget", "greedy", "seed", "workers"},
                          where);
  io::read_field(j, "env_seeds", p.env_seeds, where);
  io::read_field(j, "episodes_per_seed", p.episodes_per_seed, where);
  io::read_field(j, "greedy", p.greedy, where);
  io::read_field(j, "seed", p.seed, where);
  io::read_field(j, "workers", p.workers, where);
  if (j.contains("attacker")) {
    std::string tag;
    io::read_field(j, "attacker", tag, where);
    if (tag == "none") {
      p.attacker.reset();
    } else {
      try {
        p.attacker = attacks::objective_from_string(tag);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (j.contains("budget")) p.budget = training::parse_budget(j.at("budget"), p.budget);
  if (p.env_seeds < 1 || p.episodes_per_seed < 1 || p.workers < 1) {
    throw ConfigError("eval needs env_seeds, episodes_per_seed and workers >= 1");
  }
  return p;
}

// landscape block

struct LandscapeConfig {
  std::size_t states = 500;
  int restarts = 20;
  std::uint64_t seed = 0;
  attacks::PerturbationBudget budget = attacks::PerturbationBudget::with_epsilon(0.05);
  std::size_t bins = 20;
};

json to_json(const LandscapeConfig& c) {
  return {{"states", c.states}, {"restarts", c.restarts}, {"seed", c.seed},
          {"budget", training::to_json(c.budget)}, {"bins", c.bins}};
}

LandscapeConfig parse_landscape(const json& j, LandscapeConfig c) {
  const std::string where = "landscape";
  io::reject_unknown_keys(j, {"states", "restarts", "seed", "budget", "bins"}, where);
  io::read_field(j, "states", c.states, where);
  io::read_field(j, "restarts", c.restarts, where);
  io::read_field(j, "seed", c.seed, where);
  io::read_field(j, "bins", c.bins, where);
  if (j.contains("budget")) c.budget = training::parse_budget(j.at("budget"), c.budget);
  if (c.states < 1 || c.restarts < 2 || c.bins < 1) {
    throw ConfigError("landscape needs states >= 1, restarts >= 2 and bins >= 1");
  }
  return c;
}

// attack block

struct AttackConfig {
  attacks::ObjectiveTag objective = attacks::ObjectiveTag::kCePgd;
  attacks::PerturbationBudget budget = attacks::PerturbationBudget::with_epsilon(0.05);
  std::size_t states = 100;
  std::uint64_t seed = 0;
};

json to_json(const AttackConfig& c) {
  return {{"objective", attacks::to_string(c.objective)},
          {"budget", training::to_json(c.budget)},
          {"states", c.states},
          {"seed", c.seed}};
}

AttackConfig parse_attack(const json& j, AttackConfig c) {
  const std::string where = "attack";
  io::reject_unknown_keys(j, {"objective", "budget", "states", "seed"}, where);
  if (j.contains("objective")) {
    std::string tag;
    io::read_field(j, "objective", tag, where);
    try {
      c.objective = attacks::objective_from_string(tag);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  io::read_field(j, "states", c.states, where);
  io::read_field(j, "seed", c.seed, where);
  if (j.contains("budget")) c.budget = training::parse_budget(j.at("budget"), c.budget);
  if (c.states < 1) throw ConfigError("attack needs states >= 1");
  return c;
}

// verify block

json to_json(const VerifyOptions& o) {
  return {{"entropy_floors", o.entropy_floors}, {"epsilon", o.epsilon},
          {"grid_pitch", o.grid_pitch},         {"seed", o.seed},
          {"certificate_samples", o.certificate_samples}, {"corrupt_q", o.corrupt_q}};
}

VerifyOptions parse_verify(const json& j, VerifyOptions o) {
  const std::string where = "verify";
  io::reject_unknown_keys(j, {"entropy_floors", "epsilon", "grid_pitch", "seed", "certificate_samples", "corrupt_q"},
                          where);
  io::read_field(j, "entropy_floors", o.entropy_floors, where);
  io::read_field(j, "epsilon", o.epsilon, where);
  io::read_field(j, "grid_pitch", o.grid_pitch, where);
  io::read_field(j, "seed", o.seed, where);
  io::read_field(j, "certificate_samples", o.certificate_samples, where);
  io::read_field(j, "corrupt_q", o.corrupt_q, where);
  if (o.entropy_floors.empty() || o.epsilon <= 0.0 || o.grid_pitch <= 0.0) {
    throw ConfigError("verify needs entropy floors, epsilon > 0 and grid_pitch > 0");
  }
  return o;
}

// Subcommand state filled by CLI11, turned into the flag layer afterwards.
struct Flags {
  std::string config, out, env, env_params, trainer, resume, attacker, objective, label;
  std::vector<std::string> models;
  std::vector<double> eps, floors;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  int workers = 1, env_seeds = 1, episodes = 1, restarts = 2, checkpoint_every = 0;
  std::size_t states = 1;
  bool greedy = false, corrupt_q = false;
};

class Command {
 public:
  Command(CLI::App& app, const char* name, const char* help) : sub_(app.add_subcommand(name, help)) {
    sub_->add_option("-c,--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    sub_->add_option("-o,--out", f.out, "Output directory (relative paths go under $ADVRL_OUTPUT_ROOT)");
  }

  CLI::App* app() const { return sub_; }
  bool given(const std::string& name) const { return sub_->get_option(name)->count() > 0; }

  void env_flags() {
    sub_->add_option("--env", f.env, "Environment id");
    sub_->add_option("--env-params", f.env_params, "Environment parameters as a JSON object");
  }

  /// Adds the env flags to `layer`.
  void put_env(json& layer) const {
    if (given("--env")) layer["env"]["id"] = f.env;
    if (given("--env-params")) {
      try {
        layer["env"]["params"] = json::parse(f.env_params);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("--env-params: ") + e.what());
      }
    }
  }

  Flags f;

 private:
  CLI::App* sub_;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
};

Layers load_layers(const Command& cmd, std::initializer_list<std::string_view> keys) {
  Layers l;
  if (!cmd.f.config.empty()) {
    l.file = read_json_file(cmd.f.config);
    io::reject_unknown_keys(l.file, keys, cmd.f.config);
  }
  if (cmd.given("--out")) l.flags["output"] = cmd.f.out;
  cmd.put_env(l.flags);
  return l;
}

std::string output_of(const Layers& l, const std::string& fallback) {
  std::string out = fallback;
  io::read_field(l.file, "output", out, "config");
  io::read_field(l.flags, "output", out, "flags");
  return out;
}

fs::path finish_config(Context& ctx, json resolved, const Layers& layers) {
  log_sources(ctx.err, resolved, layers);
  const auto dir = resolve_output(resolved.at("output").get<std::string>());
  write_text(dir / "resolved_config.json", resolved.dump(2) + "\n");
  return dir;
}

json eps_budget(double eps) { return {{"epsilon", eps}, {"alpha", eps / 2.0}}; }

int cmd_train(Context& ctx, const Command& cmd) {
  auto layers = load_layers(cmd, {"env", "train", "output"});
  auto& t = layers.flags["train"];
  t = json::object();
  if (cmd.given("--trainer")) t["trainer"] = cmd.f.trainer;
  if (cmd.given("--steps")) t["total_steps"] = cmd.f.steps;
  if (cmd.given("--seed")) t["seed"] = cmd.f.seed;
  if (cmd.given("--workers")) t["workers"] = cmd.f.workers;
  if (cmd.given("--checkpoint-every")) t["checkpoint_every"] = cmd.f.checkpoint_every;
  if (cmd.given("--eps")) t["budget"] = eps_budget(cmd.f.eps.at(0));

  auto env = resolve_env(layers, {{"id", "grid-nav"}, {"params", json::object()}});
  const auto cfg = layers.block("train", training::TrainConfig{},
                                [](const json& j, training::TrainConfig b) { return training::parse_train_config(j, b); });
  const json resolved = {{"env", env.resolved}, {"train", training::to_json(cfg)}, {"output", output_of(layers, "runs/train")}};
  const auto dir = finish_config(ctx, resolved, layers);

  auto trainer = cmd.f.resume.empty() ? training::Trainer(*env.env, cfg)
                                      : training::Trainer::resume(cmd.f.resume, *env.env, cfg);
  const auto metrics_path = dir / "metrics.csv";
  const bool append = !cmd.f.resume.empty() && fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!append) training::write_metrics_header(metrics);
  const std::size_t episodes_before = trainer.episodes().size();
  trainer.run((dir / "checkpoints").string(), [&](const training::Trainer&, const training::IterationMetrics& m) {
    training::write_metrics_row(metrics, m);
    metrics.flush();
  });

  const auto episodes_path = dir / "episodes.csv";
  const bool append_episodes = append && fs::exists(episodes_path);
  std::ofstream episodes(episodes_path, append_episodes ? std::ios::app : std::ios::trunc);
  episodes.precision(17);
  if (!append_episodes) episodes << "step,actor,return,length\n";
  for (std::size_t i = episodes_before; i < trainer.episodes().size(); ++i) {
    const auto& e = trainer.episodes()[i];
    episodes << e.step << ',' << e.actor << ',' << e.total_return << ',' << e.length << '\n';
  }
  ctx.out << "trained " << training::to_string(cfg.trainer) << " for " << trainer.step() << " steps; checkpoint "
          << (dir / "checkpoints" / ("ckpt_" + std::to_string(trainer.step()) + ".bin")).string() << "\n";
  return kOk;
}

void put_eval_flags(const Command& cmd, json& flags) {
  auto& e = flags["eval"];
  e = json::object();
  if (cmd.given("--seed")) e["seed"] = cmd.f.seed;
  if (cmd.given("--workers")) e["workers"] = cmd.f.workers;
  if (cmd.given("--env-seeds")) e["env_seeds"] = cmd.f.env_seeds;
  if (cmd.given("--episodes")) e["episodes_per_seed"] = cmd.f.episodes;
  if (cmd.app()->get_option_no_throw("--greedy") && cmd.given("--greedy")) e["greedy"] = cmd.f.greedy;
  if (cmd.app()->get_option_no_throw("--attacker") && cmd.given("--attacker")) e["attacker"] = cmd.f.attacker;
  if (cmd.given("--model")) flags["models"] = cmd.f.models;
  if (cmd.given("--label")) flags["label"] = cmd.f.label;
}

std::string label_of(const Layers& l) {
  std::string label = "model";
  io::read_field(l.file, "label", label, "config");
  io::read_field(l.flags, "label", label, "flags");
  return label;
}

int cmd_eval(Context& ctx, const Command& cmd) {
  auto layers = load_layers(cmd, {"env", "eval", "models", "label", "output"});
  put_eval_flags(cmd, layers.flags);
  if (cmd.given("--eps")) layers.flags["eval"]["budget"] = eps_budget(cmd.f.eps.at(0));
  const auto paths = resolve_models(layers);
  const auto models = load_models(paths);
  auto env = resolve_env(layers, default_env(models, "grid-nav"));
  auto protocol = layers.block("eval", analysis::EvalProtocol{}, parse_eval);
  const auto label = label_of(layers);
  const json resolved = {{"env", env.resolved}, {"eval", to_json(protocol)}, {"models", paths},
                         {"label", label}, {"output", output_of(layers, "runs/eval")}};
  const auto dir = finish_config(ctx, resolved, layers);
  if (protocol.attacker == attacks::ObjectiveTag::kCritic) protocol.q = exact_q(*env.env);

  const auto stats = analysis::evaluate(policies(models), *env.env, protocol);
  const std::string attacker = protocol.attacker ? attacks::to_string(*protocol.attacker) : "none";
  const double eps = protocol.attacker ? protocol.budget.epsilon : 0.0;
  std::ofstream csv(dir / "returns.csv");
  analysis::write_returns_csv(
      csv, analysis::to_rows(stats, label, attacker, eps, protocol.env_seeds, protocol.episodes_per_seed));
  const json summary = {{"label", label}, {"attacker", attacker}, {"epsilon", eps}, {"mean", stats.mean},
                        {"stddev", stats.stddev}, {"episodes", stats.returns.size()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  ctx.out << label << " " << attacker << " eps=" << eps << ": mean " << stats.mean << " std " << stats.stddev
          << " over " << stats.returns.size() << " episodes\n";
  return kOk;
}

int cmd_sweep(Context& ctx, const Command& cmd) {
  auto layers = load_layers(cmd, {"env", "eval", "models", "label", "epsilons", "output"});
  put_eval_flags(cmd, layers.flags);
  if (cmd.given("--eps")) layers.flags["epsilons"] = cmd.f.eps;
  const auto paths = resolve_models(layers);
  const auto models = load_models(paths);
  auto env = resolve_env(layers, default_env(models, "grid-nav"));
  auto protocol = layers.block("eval", analysis::EvalProtocol{}, parse_eval);
  protocol.attacker = attacks::ObjectiveTag::kCePgd;
  std::vector<double> epsilons{0.0, 0.01, 0.02, 0.05, 0.1};
  io::read_field(layers.file, "epsilons", epsilons, "config");
  io::read_field(layers.flags, "epsilons", epsilons, "flags");
  const auto label = label_of(layers);
  const json resolved = {{"env", env.resolved}, {"eval", to_json(protocol)}, {"models", paths}, {"label", label},
                         {"epsilons", epsilons}, {"output", output_of(layers, "runs/sweep")}};
  const auto dir = finish_config(ctx, resolved, layers);

  const auto rows = analysis::epsilon_sweep(policies(models), *env.env, epsilons, protocol);
  std::vector<analysis::ReturnRow> all;
  json summary = json::array();
  std::vector<double> means;
  for (const auto& r : rows) {
    const auto part = analysis::to_rows(r.stats, label, "ce_pgd", r.epsilon, protocol.env_seeds,
                                        protocol.episodes_per_seed);
    all.insert(all.end(), part.begin(), part.end());
    summary.push_back({{"epsilon", r.epsilon}, {"mean", r.stats.mean}, {"stddev", r.stats.stddev}});
    means.push_back(r.stats.mean);
    ctx.out << label << " eps=" << r.epsilon << ": mean " << r.stats.mean << " std " << r.stats.stddev << "\n";
  }
  std::ofstream csv(dir / "returns.csv");
  analysis::write_returns_csv(csv, all);
  json doc = {{"label", label}, {"rows", summary}};
  if (epsilons.size() >= 2) doc["spearman_epsilon_mean"] = analysis::spearman(epsilons, means);
  write_text(dir / "summary.json", doc.dump(2) + "\n");
  return kOk;
}

int cmd_landscape(Context& ctx, const Command& cmd) {
  auto layers = load_layers(cmd, {"env", "landscape", "models", "output"});
  auto& l = layers.flags["landscape"];
  l = json::object();
  if (cmd.given("--seed")) l["seed"] = cmd.f.seed;
  if (cmd.given("--states")) l["states"] = cmd.f.states;
  if (cmd.given("--restarts")) l["restarts"] = cmd.f.restarts;
  if (cmd.given("--eps")) l["budget"] = eps_budget(cmd.f.eps.at(0));
  if (cmd.given("--model")) layers.flags["models"] = cmd.f.models;
  const auto paths = resolve_models(layers);
  const auto models = load_models(paths);
  auto env = resolve_env(layers, default_env(models, "grid-nav"));
  const auto cfg = layers.block("landscape", LandscapeConfig{}, parse_landscape);
  const json resolved = {{"env", env.resolved}, {"landscape", to_json(cfg)}, {"models", paths},
                         {"output", output_of(layers, "runs/landscape")}};
  const auto dir = finish_config(ctx, resolved, layers);

  // Shared states: an equal share of no-attack rollout states from every model.
  std::vector<std::vector<double>> states;
  for (std::size_t m = 0; m < models.size(); ++m) {
    const std::size_t share = cfg.states * (m + 1) / models.size() - cfg.states * m / models.size();
    const auto part = analysis::sample_states(models[m].policy, *env.env, share, training::derive_seed(cfg.seed, 21, m));
    states.insert(states.end(), part.begin(), part.end());
  }
  std::ofstream csv(dir / "landscape.csv");
  csv.precision(17);
  csv << "model,state,max_kl\n";
  json summary = json::array();
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto land = analysis::kl_landscape(models[m].policy, states, cfg.restarts, cfg.budget, cfg.seed);
    for (std::size_t s = 0; s < land.per_state_max.size(); ++s) csv << m << ',' << s << ',' << land.per_state_max[s] << '\n';
    json hist = json::array();
    for (const auto& [edge, count] : land.histogram(cfg.bins)) hist.push_back({{"lower", edge}, {"count", count}});
    summary.push_back({{"model", paths[m]}, {"median", land.median()}, {"histogram", hist}});
    ctx.out << paths[m] << ": median max-KL " << land.median() << " over " << states.size() << " states\n";
  }
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return kOk;
}

int cmd_attack(Context& ctx, const Command& cmd) {
  auto layers = load_layers(cmd, {"env", "attack", "models", "output"});
  auto& a = layers.flags["attack"];
  a = json::object();
  if (cmd.given("--seed")) a["seed"] = cmd.f.seed;
  if (cmd.given("--states")) a["states"] = cmd.f.states;
  if (cmd.given("--objective")) a["objective"] = cmd.f.objective;
  if (cmd.given("--eps")) a["budget"] = eps_budget(cmd.f.eps.at(0));
  if (cmd.given("--model")) layers.flags["models"] = cmd.f.models;
  const auto paths = resolve_models(layers);
  const auto models = load_models(paths);
  auto env = resolve_env(layers, default_env(models, "grid-nav"));
  const auto cfg = layers.block("attack", AttackConfig{}, parse_attack);
  const json resolved = {{"env", env.resolved}, {"attack", to_json(cfg)}, {"models", paths},
                         {"output", output_of(layers, "runs/attack")}};
  const auto dir = finish_config(ctx, resolved, layers);

  attacks::AttackObjective objective{cfg.objective, {}};
  if (cfg.objective == attacks::ObjectiveTag::kCritic) objective.q = exact_q(*env.env);
  json doc = {{"objective", attacks::to_string(cfg.objective)}, {"budget", training::to_json(cfg.budget)},
              {"models", json::array()}};
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto states = analysis::sample_states(models[m].policy, *env.env, cfg.states, cfg.seed);
    auto records = analysis::perturbation_dump(models[m].policy, states, objective, cfg.budget, cfg.seed);
    doc["models"].push_back({{"model", paths[m]}, {"records", std::move(records)}});
  }
  write_text(dir / "attacks.json", doc.dump() + "\n");
  ctx.out << "wrote " << cfg.states * models.size() << " attack records to " << (dir / "attacks.json").string() << "\n";
  return kOk;
}

int cmd_verify(Context& ctx, const Command& cmd) {
  auto layers = load_layers(cmd, {"env", "verify", "output"});
  auto& v = layers.flags["verify"];
  v = json::object();
  if (cmd.given("--seed")) v["seed"] = cmd.f.seed;
  if (cmd.given("--floors")) v["entropy_floors"] = cmd.f.floors;
  if (cmd.given("--corrupt-q")) v["corrupt_q"] = cmd.f.corrupt_q;
  auto env = resolve_env(layers, {{"id", "chain-mdp"}, {"params", json::object()}});
  const auto opts = layers.block("verify", VerifyOptions{}, parse_verify);
  const json resolved = {{"env", env.resolved}, {"verify", to_json(opts)}, {"output", output_of(layers, "runs/verify")}};
  const auto dir = finish_config(ctx, resolved, layers);

  const auto mdp = env.env->enumerate();
  if (!mdp) throw ConfigError("verify needs an enumerable environment; '" + env.env->id() + "' is not");
  const auto results = verify_suite(*mdp, opts);
  bool all = true;
  json report = json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    ctx.out << (r.passed ? "PASS " : "FAIL ") << r.name << ": value " << r.value << " (tolerance " << r.tolerance
            << "; " << r.detail << ")\n";
    report.push_back({{"property", r.name}, {"passed", r.passed}, {"value", r.value},
                      {"tolerance", r.tolerance}, {"detail", r.detail}});
  }
  write_text(dir / "verify.json", report.dump(2) + "\n");
  if (!all) {
    ctx.err << "advrl: verification failed\n";
    return kVerifyFailed;
  }
  return kOk;
}

int dispatch(Context& ctx, int argc, const char* const* argv) {
  CLI::App app{"Adversarially robust policy training, attacks and analysis", "advrl"};
  app.require_subcommand(1);

  Command train(app, "train", "Train a policy");
  train.env_flags();
  train.app()->add_option("--trainer", train.f.trainer, "standard | atpa | stagewise | dataaugment");
  train.app()->add_option("--eps", train.f.eps, "Training attack radius")->expected(1);
  train.app()->add_option("--steps", train.f.steps, "Total environment steps");
  train.app()->add_option("--seed", train.f.seed, "Training seed");
  train.app()->add_option("--workers", train.f.workers, "Actor threads")->check(CLI::PositiveNumber);
  train.app()->add_option("--checkpoint-every", train.f.checkpoint_every, "Iterations between checkpoints");
  train.app()->add_option("--resume", train.f.resume, "Continue from a trainer checkpoint")->check(CLI::ExistingFile);

  Command eval(app, "eval", "Evaluate checkpoints, optionally under attack");
  Command sweep(app, "sweep", "Evaluate checkpoints over a list of attack radii");
  for (Command* c : {&eval, &sweep}) {
    c->env_flags();
    c->app()->add_option("-m,--model", c->f.models, "Trainer checkpoint (repeatable)");
    c->app()->add_option("--label", c->f.label, "Trainer label written to the returns CSV");
    c->app()->add_option("--seed", c->f.seed, "Protocol seed");
    c->app()->add_option("--workers", c->f.workers, "Episode threads")->check(CLI::PositiveNumber);
    c->app()->add_option("--env-seeds", c->f.env_seeds, "Environment seeds per model");
    c->app()->add_option("--episodes", c->f.episodes, "Episodes per environment seed");
  }
  eval.app()->add_option("--attacker", eval.f.attacker, "none | ce_pgd | max_pgd | min_pgd | critic | random");
  eval.app()->add_option("--eps", eval.f.eps, "Attack radius")->expected(1);
  eval.app()->add_flag("--greedy", eval.f.greedy, "Act greedily");
  sweep.app()->add_option("--eps", sweep.f.eps, "Ascending attack radii");

  Command landscape(app, "landscape", "Per-state max-KL over PGD restarts");
  landscape.env_flags();
  landscape.app()->add_option("-m,--model", landscape.f.models, "Trainer checkpoint (repeatable)");
  landscape.app()->add_option("--seed", landscape.f.seed, "Sampling and restart seed");
  landscape.app()->add_option("--states", landscape.f.states, "Shared states");
  landscape.app()->add_option("--restarts", landscape.f.restarts, "Restarts per state");
  landscape.app()->add_option("--eps", landscape.f.eps, "Attack radius")->expected(1);

  Command attack(app, "attack", "Dump attack records on sampled states");
  attack.env_flags();
  attack.app()->add_option("-m,--model", attack.f.models, "Trainer checkpoint (repeatable)");
  attack.app()->add_option("--seed", attack.f.seed, "Sampling and attack seed");
  attack.app()->add_option("--states", attack.f.states, "States per model");
  attack.app()->add_option("--objective", attack.f.objective, "ce_pgd | max_pgd | min_pgd | critic | random");
  attack.app()->add_option("--eps", attack.f.eps, "Attack radius")->expected(1);

  Command verify(app, "verify", "Exact-solver invariant suite on an enumerable environment");
  verify.env_flags();
  verify.app()->add_option("--seed", verify.f.seed, "Seed for randomized checks");
  verify.app()->add_option("--floors", verify.f.floors, "Entropy floors");
  verify.app()->add_flag("--corrupt-q", verify.f.corrupt_q)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, ctx.out, ctx.err);
    return code == 0 ? kOk : kUsage;
  }
  if (train.app()->parsed()) return cmd_train(ctx, train);
  if (eval.app()->parsed()) return cmd_eval(ctx, eval);
  if (sweep.app()->parsed()) return cmd_sweep(ctx, sweep);
  if (landscape.app()->parsed()) return cmd_landscape(ctx, landscape);
  if (attack.app()->parsed()) return cmd_attack(ctx, attack);
  return cmd_verify(ctx, verify);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  try {
    return dispatch(ctx, argc, argv);
  } catch (const ConfigError& e) {
    err << "advrl: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InfeasibleError& e) {
    err << "advrl: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    err << "advrl: numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const ConvergenceError& e) {
    err << "advrl: numeric abort: " << e.what() << "\n";
    return kNumericAbort;
  } catch (const LoadError& e) {
    err << "advrl: load error: " << e.what() << "\n";
    return kLoadError;
  } catch (const UsageError& e) {
    err << "advrl: usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "advrl: error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace advrl::cli
