#include "iqlab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace iqlab {

namespace {

std::string format_double(double x, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, x);
  return buf;
}

const char* to_string(CvMode mode) {
  return mode == CvMode::kTurnWise ? "turn" : "dialogue";
}

// Seed derived from the training subset itself, so results do not depend on
// the order folds are scheduled in.
std::uint64_t subset_seed(std::uint64_t base, std::span<const PrefixSample> samples) {
  std::uint64_t h = base;
  for (const PrefixSample& s : samples) {
    h = Rng::derive_seed(h, static_cast<std::uint64_t>(s.dialogue_index) * 131 +
                                static_cast<std::uint64_t>(s.t));
  }
  return h;
}

// Dialogue-wise hold-out from the training subset for best-epoch selection.
void split_validation(const Corpus& corpus, std::span<const PrefixSample> train,
                      double fraction, std::uint64_t seed,
                      std::vector<PrefixSample>& fit_samples,
                      std::vector<PrefixSample>& val_samples) {
  std::vector<int> dialogues;
  for (const PrefixSample& s : train)
    if (std::find(dialogues.begin(), dialogues.end(), s.dialogue_index) ==
        dialogues.end())
      dialogues.push_back(s.dialogue_index);
  Rng rng(seed);
  rng.shuffle(dialogues);
  const int n_val = std::max(1, static_cast<int>(std::lround(
                                    fraction * static_cast<double>(dialogues.size()))));
  std::vector<bool> is_val_dialogue(corpus.dialogues.size(), false);
  for (int i = 0; i < n_val && i < static_cast<int>(dialogues.size()) - 1; ++i)
    is_val_dialogue[dialogues[i]] = true;
  for (const PrefixSample& s : train)
    (is_val_dialogue[s.dialogue_index] ? val_samples : fit_samples).push_back(s);
  if (fit_samples.empty()) {
    fit_samples.assign(train.begin(), train.end());
    val_samples.clear();
  }
}

}  // namespace

EstimatorFactory make_estimator_factory(const std::string& variant,
                                        const EstimatorBenchmarkConfig& config) {
  if (variant == "svm") {
    return [config](const Corpus& corpus,
                    std::span<const PrefixSample> train) -> TrainedPredictor {
      SvmConfig svm_config;
      svm_config.seed = subset_seed(config.seed, train);
      auto params = std::make_shared<SvmBaselineParams>(
          train_svm_on(corpus, train, svm_config));
      return TrainedPredictor{
          [params](const Dialogue& d, int t) { return predict_svm(*params, d, t); },
          -1};
    };
  }

  IqModelConfig model_config;
  model_config.hidden_size = config.hidden_size;
  model_config.attention_dim = config.attention_dim;
  if (variant == "lstm") {
    model_config.bidirectional = false;
    model_config.use_attention = false;
  } else if (variant == "bilstm") {
    model_config.bidirectional = true;
    model_config.use_attention = false;
  } else if (variant == "lstm-att") {
    model_config.bidirectional = false;
    model_config.use_attention = true;
  } else if (variant == "bilstm-att") {
    model_config.bidirectional = true;
    model_config.use_attention = true;
  } else {
    throw ValidationError("unknown estimator variant: " + variant);
  }

  return [config, model_config](const Corpus& corpus,
                                std::span<const PrefixSample> train) -> TrainedPredictor {
    IqModelConfig cfg = model_config;
    cfg.seed = subset_seed(config.seed, train);
    std::vector<PrefixSample> fit_samples, val_samples;
    split_validation(corpus, train, config.validation_fraction, cfg.seed + 1,
                     fit_samples, val_samples);
    auto params = std::make_shared<IqModelParams>(init_iq_model(cfg));
    const TrainResult result =
        iqlab::train(*params, corpus, fit_samples, config.epochs, val_samples);
    return TrainedPredictor{
        [params](const Dialogue& d, int t) { return predict_iq(*params, d, t); },
        result.best_epoch};
  };
}

std::vector<EstimatorBenchmarkRow> run_estimator_benchmark(
    const Corpus& corpus, const EstimatorBenchmarkConfig& config) {
  struct Job {
    std::string variant;
    CvMode mode;
  };
  std::vector<Job> jobs;
  for (const std::string& variant : config.variants)
    for (CvMode mode : config.modes) jobs.push_back({variant, mode});

  std::vector<std::vector<EstimatorBenchmarkRow>> outputs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const Job& job = jobs[j];
      std::vector<EstimatorBenchmarkRow>& rows = outputs[j];
      try {
        const CvPlan plan = make_cv_plan(corpus, job.mode, config.n_folds, config.seed);
        const EstimatorFactory factory = make_estimator_factory(job.variant, config);
        const CvReport report = run_cv(corpus, factory, plan, 1);
        for (int f = 0; f < static_cast<int>(report.folds.size()); ++f) {
          EstimatorBenchmarkRow row;
          row.variant = job.variant;
          row.mode = job.mode;
          row.fold = f;
          row.metrics = report.folds[f].metrics;
          row.best_epoch = report.folds[f].best_epoch;
          rows.push_back(row);
        }
        EstimatorBenchmarkRow pooled;
        pooled.variant = job.variant;
        pooled.mode = job.mode;
        pooled.fold = -1;
        pooled.metrics = report.pooled;
        pooled.best_epoch = report.mean_best_epoch;
        rows.push_back(pooled);
      } catch (const std::exception& e) {
        EstimatorBenchmarkRow failed;
        failed.variant = job.variant;
        failed.mode = job.mode;
        failed.fold = -1;
        failed.failed = true;
        failed.error = e.what();
        rows.assign(1, failed);
      }
    }
  };
  if (config.threads <= 1) {
    worker();
  } else {
    std::vector<std::future<void>> workers;
    for (int w = 0; w < config.threads; ++w)
      workers.push_back(std::async(std::launch::async, worker));
    for (auto& w : workers) w.get();
  }

  std::vector<EstimatorBenchmarkRow> rows;
  for (const auto& out : outputs) rows.insert(rows.end(), out.begin(), out.end());
  return rows;
}

void write_estimator_report(const std::vector<EstimatorBenchmarkRow>& rows,
                            std::ostream& out) {
  out << "# estimator cross-validation benchmark\n";
  out << "# fold=-1 is the pooled row over all fold test predictions\n";
  out << "variant,cv_mode,fold,n,uar,kappa,rho,extended_accuracy,best_epoch,error\n";
  for (const EstimatorBenchmarkRow& row : rows) {
    out << row.variant << "," << to_string(row.mode) << "," << row.fold << ",";
    if (row.failed) {
      out << "0,,,,,," << row.error << "\n";
      continue;
    }
    out << row.metrics.n << "," << format_double(row.metrics.uar) << ","
        << format_double(row.metrics.kappa) << ",";
    if (row.metrics.rho)
      out << format_double(*row.metrics.rho);
    else
      out << "nan";
    out << "," << format_double(row.metrics.extended_accuracy) << ",";
    if (row.best_epoch >= 0)
      out << row.best_epoch;
    else
      out << "-";
    out << ",\n";
  }
}

// ---------------------------------------------------------------------------
// Policy benchmark

IqEstimators load_estimators(const PolicyBenchmarkConfig& config) {
  if (config.iq_svm_checkpoint.empty() || config.iq_bilstm_checkpoint.empty())
    throw ValidationError(
        "policy benchmark requires iq_svm and iq_bilstm checkpoints");
  return IqEstimators{load_svm_model(config.iq_svm_checkpoint),
                      load_iq_model(config.iq_bilstm_checkpoint)};
}

namespace {

Dialogue live_dialogue(const std::vector<Exchange>& exchanges) {
  Dialogue d;
  d.id = "live";
  d.exchanges = exchanges;
  return d;
}

}  // namespace

PolicyCellResult run_policy_cell(const DomainOntology& ontology, double ser,
                                 RewardKind reward, std::uint64_t seed,
                                 const PolicyBenchmarkConfig& config,
                                 const IqEstimators& estimators,
                                 GpPolicy* trained_out) {
  PolicyCellResult cell;
  cell.domain = ontology.name;
  cell.ser = ser;
  cell.reward = reward;
  cell.seed = seed;

  // Local copies: prediction binds parameters into tapes, and cells run in
  // parallel workers.
  SvmBaselineParams svm = estimators.svm;
  IqModelParams bilstm = estimators.bilstm;

  const IqScorer svm_scorer = [&svm](const std::vector<Exchange>& exchanges) {
    if (exchanges.empty()) return 1;  // aborted dialogue
    const Dialogue d = live_dialogue(exchanges);
    return predict_svm(svm, d, d.length());
  };
  const IqScorer bilstm_scorer = [&bilstm](const std::vector<Exchange>& exchanges) {
    if (exchanges.empty()) return 1;
    const Dialogue d = live_dialogue(exchanges);
    return predict_iq(bilstm, d, d.length());
  };
  const IqScorer* active_scorer = nullptr;
  if (reward == RewardKind::kIqSvm) active_scorer = &svm_scorer;
  if (reward == RewardKind::kIqBiLstm) active_scorer = &bilstm_scorer;

  EpisodeConfig episode_config;
  episode_config.reward.kind = reward;
  episode_config.ser = ser;
  episode_config.error_model = config.error_model;
  episode_config.turn_cap = config.turn_cap;

  GpPolicy policy(static_cast<int>(action_inventory(ontology).size()), config.gp);
  Rng master(seed);

  for (int ep = 0; ep < config.train_dialogues; ++ep) {
    Rng rng = master.fork(static_cast<std::uint64_t>(ep));
    Rng explore_rng = master.fork(0x10000000ULL + static_cast<std::uint64_t>(ep));
    const ActionSelector selector = [&](std::span<const double> summary,
                                        const std::vector<bool>& mask) {
      return policy.select_action(summary, mask, /*explore=*/true, explore_rng);
    };
    const EpisodeResult episode =
        run_episode(selector, ontology, episode_config, rng, active_scorer);
    std::vector<TdStep> trajectory;
    trajectory.reserve(episode.turns.size());
    for (const TurnRecord& turn : episode.turns)
      trajectory.push_back({turn.summary, turn.action_index, turn.reward});
    policy.episode_update(trajectory);
  }

  double tsr_sum = 0.0, adl_sum = 0.0, aiq_svm_sum = 0.0, aiq_bilstm_sum = 0.0;
  for (int ep = 0; ep < config.eval_dialogues; ++ep) {
    Rng rng = master.fork(0x20000000ULL + static_cast<std::uint64_t>(ep));
    Rng greedy_rng = master.fork(0x30000000ULL + static_cast<std::uint64_t>(ep));
    const ActionSelector selector = [&](std::span<const double> summary,
                                        const std::vector<bool>& mask) {
      return policy.select_action(summary, mask, /*explore=*/false, greedy_rng);
    };
    const EpisodeResult episode =
        run_episode(selector, ontology, episode_config, rng, active_scorer);
    tsr_sum += episode.success ? 1.0 : 0.0;
    adl_sum += episode.length();
    // Both estimators score every evaluation dialogue, whichever reward
    // drove the policy.
    const std::vector<Exchange> exchanges = episode.exchanges();
    const int iq_s = svm_scorer(exchanges);
    const int iq_bi = bilstm_scorer(exchanges);
    cell.iq_svm_per_dialogue.push_back(iq_s);
    cell.iq_bilstm_per_dialogue.push_back(iq_bi);
    aiq_svm_sum += iq_s;
    aiq_bilstm_sum += iq_bi;
  }
  const double n_eval = static_cast<double>(config.eval_dialogues);
  cell.tsr = tsr_sum / n_eval;
  cell.adl = adl_sum / n_eval;
  cell.aiq_svm = aiq_svm_sum / n_eval;
  cell.aiq_bilstm = aiq_bilstm_sum / n_eval;
  if (trained_out != nullptr) *trained_out = policy;
  return cell;
}

PolicyBenchmarkResult run_policy_benchmark(const PolicyBenchmarkConfig& config) {
  const IqEstimators estimators = load_estimators(config);

  struct CellSpec {
    std::string domain;
    double ser;
    RewardKind reward;
    std::uint64_t seed;
  };
  std::vector<CellSpec> specs;
  for (const std::string& domain : config.domains)
    for (double ser : config.ser_levels)
      for (RewardKind reward : config.rewards)
        for (std::uint64_t seed : config.seeds)
          specs.push_back({domain, ser, reward, seed});

  std::map<std::string, DomainOntology> ontologies;
  for (const std::string& domain : config.domains)
    ontologies.emplace(domain, make_domain_preset(domain));

  PolicyBenchmarkResult result;
  result.cells.resize(specs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      const CellSpec& spec = specs[i];
      result.cells[i] = run_policy_cell(ontologies.at(spec.domain), spec.ser,
                                        spec.reward, spec.seed, config, estimators);
    }
  };
  if (config.threads <= 1) {
    worker();
  } else {
    std::vector<std::future<void>> workers;
    for (int w = 0; w < config.threads; ++w)
      workers.push_back(std::async(std::launch::async, worker));
    for (auto& w : workers) w.get();
  }

  // Aggregate over seeds in spec order.
  for (const std::string& domain : config.domains) {
    for (double ser : config.ser_levels) {
      for (RewardKind reward : config.rewards) {
        ResultRow row;
        row.domain = domain;
        row.ser = ser;
        row.reward = reward;
        for (const PolicyCellResult& cell : result.cells) {
          if (cell.domain != domain || cell.ser != ser || cell.reward != reward)
            continue;
          row.tsr += cell.tsr;
          row.aiq_svm += cell.aiq_svm;
          row.aiq_bilstm += cell.aiq_bilstm;
          row.adl += cell.adl;
          ++row.n_seeds;
        }
        if (row.n_seeds > 0) {
          row.tsr /= row.n_seeds;
          row.aiq_svm /= row.n_seeds;
          row.aiq_bilstm /= row.n_seeds;
          row.adl /= row.n_seeds;
          result.rows.push_back(row);
        }
      }
    }
  }

  // Pairwise significance per (domain, ser): per-seed TSR/ADL under Welch's
  // t, pooled per-dialogue IQ estimates under Mann-Whitney U.
  auto cells_of = [&](const std::string& domain, double ser, RewardKind reward) {
    std::vector<const PolicyCellResult*> out;
    for (const PolicyCellResult& cell : result.cells)
      if (cell.domain == domain && cell.ser == ser && cell.reward == reward)
        out.push_back(&cell);
    return out;
  };
  for (const std::string& domain : config.domains) {
    for (double ser : config.ser_levels) {
      for (std::size_t a = 0; a < config.rewards.size(); ++a) {
        for (std::size_t b = a + 1; b < config.rewards.size(); ++b) {
          const auto cells_a = cells_of(domain, ser, config.rewards[a]);
          const auto cells_b = cells_of(domain, ser, config.rewards[b]);
          if (cells_a.size() < 2 || cells_b.size() < 2) continue;
          auto gather = [](const std::vector<const PolicyCellResult*>& cells,
                           auto getter) {
            std::vector<double> v;
            for (const PolicyCellResult* c : cells) getter(*c, v);
            return v;
          };
          const std::vector<double> tsr_a = gather(
              cells_a, [](const PolicyCellResult& c, std::vector<double>& v) {
                v.push_back(c.tsr);
              });
          const std::vector<double> tsr_b = gather(
              cells_b, [](const PolicyCellResult& c, std::vector<double>& v) {
                v.push_back(c.tsr);
              });
          const std::vector<double> adl_a = gather(
              cells_a, [](const PolicyCellResult& c, std::vector<double>& v) {
                v.push_back(c.adl);
              });
          const std::vector<double> adl_b = gather(
              cells_b, [](const PolicyCellResult& c, std::vector<double>& v) {
                v.push_back(c.adl);
              });
          auto gather_iq = [](const std::vector<const PolicyCellResult*>& cells,
                              bool bilstm) {
            std::vector<double> v;
            for (const PolicyCellResult* c : cells)
              for (int iq : bilstm ? c->iq_bilstm_per_dialogue : c->iq_svm_per_dialogue)
                v.push_back(iq);
            return v;
          };
          auto add = [&](const std::string& metric, double p) {
            result.significance.push_back({domain, ser, metric, config.rewards[a],
                                           config.rewards[b], p, p < 0.05});
          };
          add("tsr", welch_t_test_p(tsr_a, tsr_b));
          add("adl", welch_t_test_p(adl_a, adl_b));
          add("aiq_svm",
              mann_whitney_u_p(gather_iq(cells_a, false), gather_iq(cells_b, false)));
          add("aiq_bilstm",
              mann_whitney_u_p(gather_iq(cells_a, true), gather_iq(cells_b, true)));
        }
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reports

void write_policy_report(const PolicyBenchmarkResult& result, std::ostream& out) {
  out << "# policy benchmark: averages over seeds per (domain, ser, reward)\n";
  out << "domain,ser,reward,tsr,aiq_svm,aiq_bilstm,adl,n_seeds\n";
  for (const ResultRow& row : result.rows) {
    out << row.domain << "," << format_double(row.ser, 2) << ","
        << to_string(row.reward) << "," << format_double(row.tsr, 4) << ","
        << format_double(row.aiq_svm, 4) << "," << format_double(row.aiq_bilstm, 4)
        << "," << format_double(row.adl, 4) << "," << row.n_seeds << "\n";
  }
}

void write_significance_report(const PolicyBenchmarkResult& result,
                               std::ostream& out) {
  out << "# pairwise tests: welch t (tsr, adl), mann-whitney u (aiq)\n";
  out << "domain,ser,metric,reward_a,reward_b,p_value,significant\n";
  for (const SignificanceRow& row : result.significance) {
    out << row.domain << "," << format_double(row.ser, 2) << "," << row.metric << ","
        << to_string(row.reward_a) << "," << to_string(row.reward_b) << ","
        << format_double(row.p_value, 6) << "," << (row.significant ? 1 : 0) << "\n";
  }
}

void write_tsr_bars(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << "# task success rate per domain; one bar group per (domain, ser)\n";
  out << "domain,ser,reward,tsr\n";
  for (const ResultRow& row : rows)
    out << row.domain << "," << format_double(row.ser, 2) << ","
        << to_string(row.reward) << "," << format_double(row.tsr, 4) << "\n";
}

void write_aiq_curves(const std::vector<ResultRow>& rows, std::ostream& out) {
  // AIQ vs SER, pooled over domains per reward.
  out << "# average interaction quality vs semantic error rate, pooled over domains\n";
  out << "ser,reward,aiq_svm,aiq_bilstm,n_domains\n";
  std::map<std::pair<double, RewardKind>, std::array<double, 3>> acc;
  for (const ResultRow& row : rows) {
    auto& slot = acc[{row.ser, row.reward}];
    slot[0] += row.aiq_svm;
    slot[1] += row.aiq_bilstm;
    slot[2] += 1.0;
  }
  for (const auto& [key, slot] : acc) {
    out << format_double(key.first, 2) << "," << to_string(key.second) << ","
        << format_double(slot[0] / slot[2], 4) << ","
        << format_double(slot[1] / slot[2], 4) << ","
        << static_cast<int>(slot[2]) << "\n";
  }
}

std::vector<ResultRow> read_policy_report(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("domain,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    ResultRow row;
    std::getline(ss, row.domain, ',');
    std::getline(ss, field, ',');
    row.ser = std::stod(field);
    std::getline(ss, field, ',');
    row.reward = reward_kind_from_string(field);
    std::getline(ss, field, ',');
    row.tsr = std::stod(field);
    std::getline(ss, field, ',');
    row.aiq_svm = std::stod(field);
    std::getline(ss, field, ',');
    row.aiq_bilstm = std::stod(field);
    std::getline(ss, field, ',');
    row.adl = std::stod(field);
    std::getline(ss, field, ',');
    row.n_seeds = std::stoi(field);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Statistics

namespace {

// Regularized incomplete beta function via continued fraction (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 200;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_beta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_beta);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (df <= 0.0) return 1.0;
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(std::span<const double> v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

}  // namespace

double welch_t_test_p(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw ContractError("welch test: need at least two samples per side");
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = var_of(a, ma), vb = var_of(b, mb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  if (se2 <= 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) +
                                 (vb / nb) * (vb / nb) / (nb - 1.0));
  return student_t_two_sided_p(t, df);
}

double mann_whitney_u_p(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw ContractError("mann-whitney test: empty sample");
  const std::size_t na = a.size(), nb = b.size();
  std::vector<std::pair<double, int>> all;
  all.reserve(na + nb);
  for (double x : a) all.emplace_back(x, 0);
  for (double x : b) all.emplace_back(x, 1);
  std::sort(all.begin(), all.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  // Average ranks with tie correction.
  std::vector<double> ranks(all.size());
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j + 1 < all.size() && all[j + 1].first == all[i].first) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[k] = r;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double rank_sum_a = 0.0;
  for (std::size_t k = 0; k < all.size(); ++k)
    if (all[k].second == 0) rank_sum_a += ranks[k];
  const double u = rank_sum_a - static_cast<double>(na) * (na + 1) / 2.0;
  const double n = static_cast<double>(na + nb);
  const double mu = static_cast<double>(na) * nb / 2.0;
  const double sigma2 = (static_cast<double>(na) * nb / 12.0) *
                        (n + 1.0 - tie_term / (n * (n - 1.0)));
  if (sigma2 <= 0.0) return 1.0;  // all values tied
  const double z = (u - mu) / std::sqrt(sigma2);
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace iqlab
