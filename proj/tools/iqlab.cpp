// Command-line front end: corpus generation, estimator training and
// evaluation, cross-validation, policy training and evaluation, and the full
// benchmark grids.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "iqlab/corpus.hpp"
#include "iqlab/dialenv.hpp"
#include "iqlab/estimator.hpp"
#include "iqlab/metrics.hpp"
#include "iqlab/policy.hpp"
#include "iqlab/runner.hpp"

namespace {

using namespace iqlab;
using nlohmann::json;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  return out;
}

CvMode cv_mode_from_string(const std::string& s) {
  if (s == "turn") return CvMode::kTurnWise;
  if (s == "dialogue") return CvMode::kDialogueWise;
  throw ValidationError("unknown cv mode: " + s + " (expected turn|dialogue)");
}

IqModelConfig variant_config(const std::string& variant, int hidden, int attention_dim,
                             std::uint64_t seed) {
  IqModelConfig config;
  config.hidden_size = hidden;
  config.attention_dim = attention_dim;
  config.seed = seed;
  if (variant == "lstm") {
    config.bidirectional = false;
    config.use_attention = false;
  } else if (variant == "bilstm") {
    config.bidirectional = true;
    config.use_attention = false;
  } else if (variant == "lstm-att") {
    config.bidirectional = false;
    config.use_attention = true;
  } else if (variant == "bilstm-att") {
    config.bidirectional = true;
    config.use_attention = true;
  } else {
    throw ValidationError("unknown variant: " + variant);
  }
  return config;
}

DomainOntology resolve_domain(const std::string& domain) {
  if (std::filesystem::exists(domain)) return load_domain(domain);
  return make_domain_preset(domain);
}

GpPolicyConfig gp_config_from_json(const json& j) {
  GpPolicyConfig gp;
  gp.prior_variance = j.value("prior_variance", gp.prior_variance);
  gp.length_scale = j.value("length_scale", gp.length_scale);
  gp.noise_variance = j.value("noise_variance", gp.noise_variance);
  gp.nu = j.value("nu", gp.nu);
  gp.dictionary_cap = j.value("dictionary_cap", gp.dictionary_cap);
  gp.gamma = j.value("gamma", gp.gamma);
  gp.jitter = j.value("jitter", gp.jitter);
  return gp;
}

void write_episode_log(const std::vector<EpisodeResult>& episodes,
                       const std::string& path) {
  std::ofstream out = open_out(path);
  for (const EpisodeResult& e : episodes) {
    json turns = json::array();
    for (const TurnRecord& t : e.turns) {
      json items = json::array();
      for (const SlotValue& sv : t.system_act.items)
        items.push_back(json{{"slot", sv.slot}, {"value", sv.value}});
      turns.push_back(json{
          {"system_act", to_string(t.system_act.type)},
          {"system_items", std::move(items)},
          {"user_act", to_string(t.user_act.type)},
          {"observed_act", to_string(t.observed.act.type)},
          {"asr_status", to_string(t.exchange.asr_status)},
          {"confidence", t.exchange.asr_confidence},
          {"reward", t.reward}});
    }
    out << json{{"turns", std::move(turns)},
                {"success", e.success},
                {"length", e.length()},
                {"reward_sum", e.reward_sum}}
               .dump()
        << "\n";
  }
}

int cmd_gen_corpus(int n, std::uint64_t seed, const std::string& profile_path,
                   const std::string& out_path, const std::string& features_csv) {
  GeneratorProfile profile;
  if (!profile_path.empty()) profile = load_generator_profile(profile_path);
  const Corpus corpus = generate_corpus(n, seed, profile);
  save_corpus(corpus, out_path);
  std::cout << "wrote " << corpus.dialogues.size() << " dialogues ("
            << corpus.total_exchanges() << " exchanges) to " << out_path << "\n";
  if (!features_csv.empty()) {
    std::ofstream out = open_out(features_csv);
    write_feature_csv(corpus, out);
    std::cout << "wrote feature matrix to " << features_csv << "\n";
  }
  return 0;
}

int cmd_train_iq(const std::string& corpus_path, const std::string& variant,
                 int epochs, std::uint64_t seed, int hidden, int attention_dim,
                 double validation_fraction, const std::string& out_path) {
  const Corpus corpus = load_corpus(corpus_path);
  if (variant == "svm") {
    SvmConfig config;
    config.seed = seed;
    const SvmBaselineParams params = train_svm_baseline(corpus, config);
    save_model(params, out_path);
    std::cout << "wrote svm baseline to " << out_path << "\n";
    return 0;
  }
  IqModelParams params =
      init_iq_model(variant_config(variant, hidden, attention_dim, seed));
  const std::vector<PrefixSample> samples = all_prefix_samples(corpus);
  std::vector<PrefixSample> fit = samples, val;
  if (validation_fraction > 0.0) {
    // Hold out whole dialogues from the tail of a seeded shuffle.
    std::vector<int> dialogues(corpus.dialogues.size());
    for (std::size_t i = 0; i < dialogues.size(); ++i) dialogues[i] = static_cast<int>(i);
    Rng rng(seed + 1);
    rng.shuffle(dialogues);
    const int n_val = std::max(
        1, static_cast<int>(validation_fraction * static_cast<double>(dialogues.size())));
    std::vector<bool> in_val(corpus.dialogues.size(), false);
    for (int i = 0; i < n_val; ++i) in_val[dialogues[i]] = true;
    fit.clear();
    for (const PrefixSample& s : samples)
      (in_val[s.dialogue_index] ? val : fit).push_back(s);
  }
  const TrainResult result = train(params, corpus, fit, epochs, val);
  save_model(params, out_path);
  std::cout << "trained " << params.config.variant_name() << " for " << epochs
            << " epochs; final loss " << result.epoch_loss.back();
  if (result.best_epoch > 0) std::cout << "; best epoch " << result.best_epoch;
  std::cout << "; wrote " << out_path << "\n";
  return 0;
}

int cmd_eval_iq(const std::string& model_path, const std::string& corpus_path,
                const std::string& csv_path) {
  const Corpus corpus = load_corpus(corpus_path);
  std::vector<LabelPair> pairs;
  std::string model_name;
  // Try the neural container first, then the svm container.
  try {
    IqModelParams params = load_iq_model(model_path);
    model_name = params.config.variant_name();
    for (const PrefixSample& s : all_prefix_samples(corpus)) {
      const Dialogue& d = corpus.dialogues[s.dialogue_index];
      pairs.emplace_back(d.exchanges[s.t - 1].iq_label, predict_iq(params, d, s.t));
    }
  } catch (const ValidationError&) {
    SvmBaselineParams params = load_svm_model(model_path);
    model_name = "svm";
    for (const PrefixSample& s : all_prefix_samples(corpus)) {
      const Dialogue& d = corpus.dialogues[s.dialogue_index];
      pairs.emplace_back(d.exchanges[s.t - 1].iq_label, predict_svm(params, d, s.t));
    }
  }
  const MetricSet m = compute_metrics(pairs);
  std::cout << "model " << model_name << " on " << corpus_path << " (" << m.n
            << " sub-dialogues)\n";
  std::cout << "uar " << m.uar << "\nkappa " << m.kappa << "\nrho "
            << (m.rho ? std::to_string(*m.rho) : "nan") << "\nextended_accuracy "
            << m.extended_accuracy << "\n";
  if (!csv_path.empty()) {
    std::ofstream out = open_out(csv_path);
    out << "model,n,uar,kappa,rho,extended_accuracy\n";
    out << model_name << "," << m.n << "," << m.uar << "," << m.kappa << ","
        << (m.rho ? std::to_string(*m.rho) : "nan") << "," << m.extended_accuracy
        << "\n";
  }
  return 0;
}

int cmd_crossval(const std::string& corpus_path, const std::string& variant,
                 const std::string& mode, EstimatorBenchmarkConfig config,
                 const std::string& out_path) {
  const Corpus corpus = load_corpus(corpus_path);
  config.variants = {variant};
  config.modes = {cv_mode_from_string(mode)};
  const std::vector<EstimatorBenchmarkRow> rows =
      run_estimator_benchmark(corpus, config);
  for (const EstimatorBenchmarkRow& row : rows) {
    if (row.failed) {
      std::cerr << "variant " << row.variant << " failed: " << row.error << "\n";
      return 1;
    }
    if (row.fold < 0)
      std::cout << "pooled uar " << row.metrics.uar << ", kappa " << row.metrics.kappa
                << ", eA " << row.metrics.extended_accuracy << "\n";
  }
  if (!out_path.empty()) {
    std::ofstream out = open_out(out_path);
    write_estimator_report(rows, out);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_train_policy(const std::string& domain, const std::string& reward,
                     double ser, std::uint64_t seed, int dialogues,
                     const std::string& iq_svm, const std::string& iq_bilstm,
                     int turn_cap, const GpPolicyConfig& gp,
                     const std::string& out_path) {
  PolicyBenchmarkConfig config;
  config.iq_svm_checkpoint = iq_svm;
  config.iq_bilstm_checkpoint = iq_bilstm;
  config.train_dialogues = dialogues;
  config.eval_dialogues = 0;
  config.turn_cap = turn_cap;
  config.gp = gp;
  const IqEstimators estimators = load_estimators(config);
  const DomainOntology ontology = resolve_domain(domain);
  GpPolicy trained(static_cast<int>(action_inventory(ontology).size()), gp);
  run_policy_cell(ontology, ser, reward_kind_from_string(reward), seed, config,
                  estimators, &trained);
  trained.save(out_path);
  std::cout << "trained policy on " << ontology.name << " (" << dialogues
            << " dialogues, ser " << ser << ", reward " << reward
            << "); dictionary size " << trained.dictionary_size() << "; wrote "
            << out_path << "\n";
  return 0;
}

int cmd_eval_policy(const std::string& policy_path, const std::string& domain,
                    const std::string& reward, double ser, std::uint64_t seed,
                    int dialogues, const std::string& iq_svm,
                    const std::string& iq_bilstm, int turn_cap,
                    const std::string& log_path) {
  PolicyBenchmarkConfig config;
  config.iq_svm_checkpoint = iq_svm;
  config.iq_bilstm_checkpoint = iq_bilstm;
  const IqEstimators estimators = load_estimators(config);
  const DomainOntology ontology = resolve_domain(domain);
  GpPolicy policy = GpPolicy::load(policy_path);

  SvmBaselineParams svm = estimators.svm;
  IqModelParams bilstm = estimators.bilstm;
  const IqScorer svm_scorer = [&svm](const std::vector<Exchange>& ex) {
    if (ex.empty()) return 1;  // aborted dialogue
    Dialogue d;
    d.id = "live";
    d.exchanges = ex;
    return predict_svm(svm, d, d.length());
  };
  const IqScorer bilstm_scorer = [&bilstm](const std::vector<Exchange>& ex) {
    if (ex.empty()) return 1;
    Dialogue d;
    d.id = "live";
    d.exchanges = ex;
    return predict_iq(bilstm, d, d.length());
  };
  EpisodeConfig episode_config;
  episode_config.reward.kind = reward_kind_from_string(reward);
  episode_config.ser = ser;
  episode_config.turn_cap = turn_cap;
  const IqScorer* active = nullptr;
  if (episode_config.reward.kind == RewardKind::kIqSvm) active = &svm_scorer;
  if (episode_config.reward.kind == RewardKind::kIqBiLstm) active = &bilstm_scorer;

  Rng master(seed);
  double tsr = 0.0, adl = 0.0, aiq_s = 0.0, aiq_bi = 0.0;
  std::vector<EpisodeResult> episodes;
  for (int ep = 0; ep < dialogues; ++ep) {
    Rng rng = master.fork(0x20000000ULL + static_cast<std::uint64_t>(ep));
    Rng greedy_rng = master.fork(0x30000000ULL + static_cast<std::uint64_t>(ep));
    const ActionSelector selector = [&](std::span<const double> summary,
                                        const std::vector<bool>& mask) {
      return policy.select_action(summary, mask, false, greedy_rng);
    };
    EpisodeResult episode =
        run_episode(selector, ontology, episode_config, rng, active);
    tsr += episode.success ? 1 : 0;
    adl += episode.length();
    const std::vector<Exchange> ex = episode.exchanges();
    aiq_s += svm_scorer(ex);
    aiq_bi += bilstm_scorer(ex);
    episodes.push_back(std::move(episode));
  }
  const double n = static_cast<double>(dialogues);
  std::cout << "tsr " << tsr / n << "\nadl " << adl / n << "\naiq_svm " << aiq_s / n
            << "\naiq_bilstm " << aiq_bi / n << "\n";
  if (!log_path.empty()) {
    write_episode_log(episodes, log_path);
    std::cout << "wrote episode log to " << log_path << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir) {
  std::ifstream in(config_path);
  if (!in) throw IoError("cannot open config file: " + config_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(config_path + ": invalid JSON: " + std::string(e.what()));
  }
  std::filesystem::create_directories(out_dir);

  // Corpus: either a path or generator settings.
  Corpus corpus;
  const json jc = j.value("corpus", json::object());
  if (jc.contains("path")) {
    corpus = load_corpus(jc.at("path").get<std::string>());
  } else {
    corpus = generate_corpus(jc.value("n", 200), jc.value("seed", 7));
    save_corpus(corpus, out_dir + "/corpus.jsonl");
  }

  EstimatorBenchmarkConfig est;
  const json je = j.value("estimator", json::object());
  if (je.contains("variants"))
    est.variants = je.at("variants").get<std::vector<std::string>>();
  if (je.contains("modes")) {
    est.modes.clear();
    for (const json& jm : je.at("modes"))
      est.modes.push_back(cv_mode_from_string(jm.get<std::string>()));
  }
  est.n_folds = je.value("folds", est.n_folds);
  est.epochs = je.value("epochs", est.epochs);
  est.hidden_size = je.value("hidden_size", est.hidden_size);
  est.attention_dim = je.value("attention_dim", est.attention_dim);
  est.validation_fraction = je.value("validation_fraction", est.validation_fraction);
  est.seed = je.value("seed", est.seed);
  est.threads = je.value("threads", est.threads);

  if (j.value("run_estimator", true)) {
    const std::vector<EstimatorBenchmarkRow> rows = run_estimator_benchmark(corpus, est);
    std::ofstream out = open_out(out_dir + "/estimator_report.csv");
    write_estimator_report(rows, out);
    std::cout << "wrote " << out_dir << "/estimator_report.csv\n";
  }

  if (!j.value("run_policy", true)) return 0;

  PolicyBenchmarkConfig pol;
  const json jp = j.value("policy", json::object());
  if (jp.contains("domains"))
    pol.domains = jp.at("domains").get<std::vector<std::string>>();
  if (jp.contains("ser_levels"))
    pol.ser_levels = jp.at("ser_levels").get<std::vector<double>>();
  if (jp.contains("rewards")) {
    pol.rewards.clear();
    for (const json& jr : jp.at("rewards"))
      pol.rewards.push_back(reward_kind_from_string(jr.get<std::string>()));
  }
  if (jp.contains("seeds"))
    pol.seeds = jp.at("seeds").get<std::vector<std::uint64_t>>();
  pol.train_dialogues = jp.value("train_dialogues", pol.train_dialogues);
  pol.eval_dialogues = jp.value("eval_dialogues", pol.eval_dialogues);
  pol.turn_cap = jp.value("turn_cap", pol.turn_cap);
  pol.threads = jp.value("threads", pol.threads);
  if (jp.contains("gp")) pol.gp = gp_config_from_json(jp.at("gp"));
  pol.iq_svm_checkpoint = jp.value("iq_svm", std::string());
  pol.iq_bilstm_checkpoint = jp.value("iq_bilstm", std::string());

  // Train missing estimator checkpoints on the benchmark corpus.
  if (pol.iq_svm_checkpoint.empty()) {
    SvmConfig svm_config;
    svm_config.seed = est.seed;
    save_model(train_svm_baseline(corpus, svm_config), out_dir + "/iq_svm.bin");
    pol.iq_svm_checkpoint = out_dir + "/iq_svm.bin";
    std::cout << "trained svm estimator checkpoint\n";
  }
  if (pol.iq_bilstm_checkpoint.empty()) {
    IqModelConfig cfg =
        variant_config("bilstm-att", est.hidden_size, est.attention_dim, est.seed);
    auto [params, result] = train_iq_model(corpus, cfg, est.epochs);
    save_model(params, out_dir + "/iq_bilstm.bin");
    pol.iq_bilstm_checkpoint = out_dir + "/iq_bilstm.bin";
    std::cout << "trained bilstm estimator checkpoint (final loss "
              << result.epoch_loss.back() << ")\n";
  }

  const PolicyBenchmarkResult result = run_policy_benchmark(pol);
  {
    std::ofstream out = open_out(out_dir + "/policy_results.csv");
    write_policy_report(result, out);
  }
  {
    std::ofstream out = open_out(out_dir + "/significance.csv");
    write_significance_report(result, out);
  }
  {
    std::ofstream out = open_out(out_dir + "/tsr_bars.csv");
    write_tsr_bars(result.rows, out);
  }
  {
    std::ofstream out = open_out(out_dir + "/aiq_curves.csv");
    write_aiq_curves(result.rows, out);
  }
  std::cout << "wrote policy benchmark reports to " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& out_dir) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open results file: " + in_path);
  const std::vector<ResultRow> rows = read_policy_report(in);
  if (rows.empty()) throw ValidationError(in_path + ": no result rows");
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out = open_out(out_dir + "/tsr_bars.csv");
    write_tsr_bars(rows, out);
  }
  {
    std::ofstream out = open_out(out_dir + "/aiq_curves.csv");
    write_aiq_curves(rows, out);
  }
  std::cout << "wrote plot data to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interaction-quality reward estimation laboratory"};
  app.require_subcommand(1);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic IQ corpus");
  int gen_n = 200;
  std::uint64_t gen_seed = 7;
  std::string gen_profile, gen_out = "corpus.jsonl", gen_features;
  gen->add_option("--n", gen_n, "number of dialogues");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--profile", gen_profile, "generator profile json");
  gen->add_option("--out", gen_out, "output corpus path")->required();
  gen->add_option("--features-csv", gen_features, "also export the feature matrix");

  // train-iq
  auto* tiq = app.add_subcommand("train-iq", "train an IQ estimator");
  std::string tiq_corpus, tiq_variant = "bilstm-att", tiq_out = "model.bin";
  int tiq_epochs = 30, tiq_hidden = 16, tiq_attn = 16;
  double tiq_val = 0.1;
  std::uint64_t tiq_seed = 1;
  tiq->add_option("--corpus", tiq_corpus)->required();
  tiq->add_option("--variant", tiq_variant,
                  "lstm|bilstm|lstm-att|bilstm-att|svm");
  tiq->add_option("--epochs", tiq_epochs);
  tiq->add_option("--seed", tiq_seed);
  tiq->add_option("--hidden", tiq_hidden);
  tiq->add_option("--attention-dim", tiq_attn);
  tiq->add_option("--validation", tiq_val, "validation dialogue fraction");
  tiq->add_option("--out", tiq_out)->required();

  // eval-iq
  auto* eiq = app.add_subcommand("eval-iq", "evaluate a checkpoint on a corpus");
  std::string eiq_model, eiq_corpus, eiq_csv;
  eiq->add_option("--model", eiq_model)->required();
  eiq->add_option("--corpus", eiq_corpus)->required();
  eiq->add_option("--csv", eiq_csv, "metric csv output");

  // crossval
  auto* cv = app.add_subcommand("crossval", "cross-validate one variant");
  std::string cv_corpus, cv_variant = "bilstm-att", cv_mode = "dialogue", cv_out;
  EstimatorBenchmarkConfig cv_config;
  cv->add_option("--corpus", cv_corpus)->required();
  cv->add_option("--variant", cv_variant);
  cv->add_option("--mode", cv_mode, "turn|dialogue");
  cv->add_option("--folds", cv_config.n_folds);
  cv->add_option("--epochs", cv_config.epochs);
  cv->add_option("--hidden", cv_config.hidden_size);
  cv->add_option("--attention-dim", cv_config.attention_dim);
  cv->add_option("--validation", cv_config.validation_fraction);
  cv->add_option("--seed", cv_config.seed);
  cv->add_option("--threads", cv_config.threads);
  cv->add_option("--out", cv_out, "csv report path");

  // train-policy
  auto* tp = app.add_subcommand("train-policy", "train a GP-SARSA policy");
  std::string tp_domain = "CR", tp_reward = "ts", tp_svm, tp_bilstm,
              tp_out = "policy.bin";
  double tp_ser = 0.0;
  std::uint64_t tp_seed = 101;
  int tp_dialogues = 1000, tp_cap = 25;
  GpPolicyConfig tp_gp;
  tp->add_option("--domain", tp_domain, "preset code or ontology json path");
  tp->add_option("--reward", tp_reward, "ts|iq-svm|iq-bilstm");
  tp->add_option("--ser", tp_ser, "semantic error rate");
  tp->add_option("--seed", tp_seed);
  tp->add_option("--dialogues", tp_dialogues);
  tp->add_option("--iq-svm", tp_svm, "svm checkpoint")->required();
  tp->add_option("--iq-bilstm", tp_bilstm, "bilstm checkpoint")->required();
  tp->add_option("--turn-cap", tp_cap);
  tp->add_option("--gp-prior-variance", tp_gp.prior_variance);
  tp->add_option("--gp-length-scale", tp_gp.length_scale);
  tp->add_option("--gp-noise", tp_gp.noise_variance);
  tp->add_option("--gp-nu", tp_gp.nu);
  tp->add_option("--gp-cap", tp_gp.dictionary_cap);
  tp->add_option("--out", tp_out)->required();

  // eval-policy
  auto* ep = app.add_subcommand("eval-policy", "evaluate a trained policy");
  std::string ep_policy, ep_domain = "CR", ep_reward = "ts", ep_svm, ep_bilstm,
              ep_log;
  double ep_ser = 0.0;
  std::uint64_t ep_seed = 101;
  int ep_dialogues = 100, ep_cap = 25;
  ep->add_option("--policy", ep_policy)->required();
  ep->add_option("--domain", ep_domain);
  ep->add_option("--reward", ep_reward);
  ep->add_option("--ser", ep_ser);
  ep->add_option("--seed", ep_seed);
  ep->add_option("--dialogues", ep_dialogues);
  ep->add_option("--iq-svm", ep_svm)->required();
  ep->add_option("--iq-bilstm", ep_bilstm)->required();
  ep->add_option("--turn-cap", ep_cap);
  ep->add_option("--log", ep_log, "episode log (json lines)");

  // bench
  auto* bench = app.add_subcommand("bench", "run the benchmark grids");
  std::string bench_config, bench_out = "results";
  bench->add_option("--config", bench_config)->required();
  bench->add_option("--out-dir", bench_out);

  // report
  auto* report = app.add_subcommand("report", "re-emit plot data from results");
  std::string report_in, report_out = "results";
  report->add_option("--in", report_in, "policy_results.csv")->required();
  report->add_option("--out-dir", report_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_corpus(gen_n, gen_seed, gen_profile, gen_out, gen_features);
    if (tiq->parsed())
      return cmd_train_iq(tiq_corpus, tiq_variant, tiq_epochs, tiq_seed, tiq_hidden,
                          tiq_attn, tiq_val, tiq_out);
    if (eiq->parsed()) return cmd_eval_iq(eiq_model, eiq_corpus, eiq_csv);
    if (cv->parsed())
      return cmd_crossval(cv_corpus, cv_variant, cv_mode, cv_config, cv_out);
    if (tp->parsed())
      return cmd_train_policy(tp_domain, tp_reward, tp_ser, tp_seed, tp_dialogues,
                              tp_svm, tp_bilstm, tp_cap, tp_gp, tp_out);
    if (ep->parsed())
      return cmd_eval_policy(ep_policy, ep_domain, ep_reward, ep_ser, ep_seed,
                             ep_dialogues, ep_svm, ep_bilstm, ep_cap, ep_log);
    if (bench->parsed()) return cmd_bench(bench_config, bench_out);
    if (report->parsed()) return cmd_report(report_in, report_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
