#include "iqlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "iqlab/rng.hpp"

namespace iqlab {

using nlohmann::json;

const char* to_string(AsrStatus s) {
  switch (s) {
    case AsrStatus::kSuccess: return "success";
    case AsrStatus::kNoMatch: return "no_match";
    case AsrStatus::kNoInput: return "no_input";
  }
  return "?";
}

const char* to_string(ActivityType t) {
  return t == ActivityType::kStatement ? "statement" : "question";
}

AsrStatus asr_status_from_string(const std::string& s) {
  if (s == "success") return AsrStatus::kSuccess;
  if (s == "no_match") return AsrStatus::kNoMatch;
  if (s == "no_input") return AsrStatus::kNoInput;
  throw ValidationError("unknown asr_status value: " + s);
}

ActivityType activity_type_from_string(const std::string& s) {
  if (s == "statement") return ActivityType::kStatement;
  if (s == "question") return ActivityType::kQuestion;
  throw ValidationError("unknown activity_type value: " + s);
}

std::size_t Corpus::total_exchanges() const {
  std::size_t n = 0;
  for (const Dialogue& d : dialogues) n += d.exchanges.size();
  return n;
}

void validate(const Corpus& corpus) {
  std::unordered_set<std::string> ids;
  for (const Dialogue& d : corpus.dialogues) {
    if (d.id.empty()) throw ValidationError("dialogue with empty id");
    if (!ids.insert(d.id).second)
      throw ValidationError("duplicate dialogue id: " + d.id);
    if (d.exchanges.empty())
      throw ValidationError("dialogue " + d.id + ": no exchanges");
    for (std::size_t i = 0; i < d.exchanges.size(); ++i) {
      const Exchange& e = d.exchanges[i];
      const std::string where = "dialogue " + d.id + ", turn " +
                                std::to_string(i + 1);
      if (e.turn_index != static_cast<int>(i) + 1)
        throw ValidationError(where + ": turn_index not consecutive");
      if (e.iq_label < 1 || e.iq_label > 5)
        throw ValidationError(where + ": iq out of range [1,5]");
      if (e.asr_confidence < 0.0 || e.asr_confidence > 1.0)
        throw ValidationError(where + ": asr_confidence out of [0,1]");
      if (e.asr_status != AsrStatus::kSuccess && e.asr_confidence != 0.0)
        throw ValidationError(where + ": confidence must be 0 unless success");
    }
  }
}

namespace {

json profile_to_json(const GeneratorProfile& p) {
  return json{{"asr_success_rate", p.asr_success_rate},
              {"no_input_share", p.no_input_share},
              {"reprompt_after_failure", p.reprompt_after_failure},
              {"reprompt_spontaneous", p.reprompt_spontaneous},
              {"question_rate", p.question_rate},
              {"confirmation_rate", p.confirmation_rate},
              {"confidence_alpha", p.confidence_alpha},
              {"confidence_beta", p.confidence_beta},
              {"target_turns", p.target_turns},
              {"length_spread", p.length_spread},
              {"p_down_on_failure", p.p_down_on_failure},
              {"p_down_on_reprompt", p.p_down_on_reprompt},
              {"p_down_on_low_confidence", p.p_down_on_low_confidence},
              {"low_confidence_threshold", p.low_confidence_threshold},
              {"p_down_on_overlength", p.p_down_on_overlength},
              {"overlength_threshold", p.overlength_threshold},
              {"p_down_on_burst", p.p_down_on_burst},
              {"p_down_on_confirmation", p.p_down_on_confirmation},
              {"p_down_on_question", p.p_down_on_question},
              {"p_down_on_grilling", p.p_down_on_grilling},
              {"p_down_baseline", p.p_down_baseline},
              {"p_recover", p.p_recover},
              {"recovery_streak", p.recovery_streak},
              {"scar_cap", p.scar_cap},
              {"burst_memory", p.burst_memory},
              {"first_impression_memory", p.first_impression_memory}};
}

GeneratorProfile profile_from_json(const json& j) {
  GeneratorProfile p;
  p.asr_success_rate = j.value("asr_success_rate", p.asr_success_rate);
  p.no_input_share = j.value("no_input_share", p.no_input_share);
  p.reprompt_after_failure = j.value("reprompt_after_failure", p.reprompt_after_failure);
  p.reprompt_spontaneous = j.value("reprompt_spontaneous", p.reprompt_spontaneous);
  p.question_rate = j.value("question_rate", p.question_rate);
  p.confirmation_rate = j.value("confirmation_rate", p.confirmation_rate);
  p.confidence_alpha = j.value("confidence_alpha", p.confidence_alpha);
  p.confidence_beta = j.value("confidence_beta", p.confidence_beta);
  p.target_turns = j.value("target_turns", p.target_turns);
  p.length_spread = j.value("length_spread", p.length_spread);
  p.p_down_on_failure = j.value("p_down_on_failure", p.p_down_on_failure);
  p.p_down_on_reprompt = j.value("p_down_on_reprompt", p.p_down_on_reprompt);
  p.p_down_on_low_confidence =
      j.value("p_down_on_low_confidence", p.p_down_on_low_confidence);
  p.low_confidence_threshold =
      j.value("low_confidence_threshold", p.low_confidence_threshold);
  p.p_down_on_overlength = j.value("p_down_on_overlength", p.p_down_on_overlength);
  p.overlength_threshold = j.value("overlength_threshold", p.overlength_threshold);
  p.p_down_on_burst = j.value("p_down_on_burst", p.p_down_on_burst);
  p.p_down_on_confirmation =
      j.value("p_down_on_confirmation", p.p_down_on_confirmation);
  p.p_down_on_question = j.value("p_down_on_question", p.p_down_on_question);
  p.p_down_on_grilling = j.value("p_down_on_grilling", p.p_down_on_grilling);
  p.p_down_baseline = j.value("p_down_baseline", p.p_down_baseline);
  p.p_recover = j.value("p_recover", p.p_recover);
  p.recovery_streak = j.value("recovery_streak", p.recovery_streak);
  p.scar_cap = j.value("scar_cap", p.scar_cap);
  p.burst_memory = j.value("burst_memory", p.burst_memory);
  p.first_impression_memory =
      j.value("first_impression_memory", p.first_impression_memory);
  return p;
}

json dialogue_to_json(const Dialogue& d) {
  json exchanges = json::array();
  for (const Exchange& e : d.exchanges) {
    exchanges.push_back(json{{"turn", e.turn_index},
                             {"asr_status", to_string(e.asr_status)},
                             {"asr_confidence", e.asr_confidence},
                             {"is_reprompt", e.is_reprompt},
                             {"activity_type", to_string(e.activity_type)},
                             {"is_confirmation", e.is_confirmation},
                             {"iq", e.iq_label}});
  }
  return json{{"id", d.id}, {"exchanges", std::move(exchanges)}};
}

template <class T>
T require_field(const json& j, const char* field, const std::string& where) {
  if (!j.contains(field))
    throw ParseError(where + ": missing field '" + field + "'");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": field '" + field + "' has wrong type");
  }
}

Dialogue dialogue_from_json(const json& j, const std::string& where) {
  Dialogue d;
  d.id = require_field<std::string>(j, "id", where);
  const json& exchanges = j.contains("exchanges") ? j.at("exchanges") : json();
  if (!exchanges.is_array())
    throw ParseError(where + ": 'exchanges' missing or not an array");
  for (const json& je : exchanges) {
    Exchange e;
    e.turn_index = require_field<int>(je, "turn", where);
    e.asr_status =
        asr_status_from_string(require_field<std::string>(je, "asr_status", where));
    e.asr_confidence = require_field<double>(je, "asr_confidence", where);
    e.is_reprompt = require_field<bool>(je, "is_reprompt", where);
    e.activity_type = activity_type_from_string(
        require_field<std::string>(je, "activity_type", where));
    e.is_confirmation = require_field<bool>(je, "is_confirmation", where);
    e.iq_label = require_field<int>(je, "iq", where);
    d.exchanges.push_back(e);
  }
  return d;
}

}  // namespace

Corpus read_corpus(std::istream& in, const std::string& origin) {
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    if (j.contains("meta")) {
      if (line_no != 1)
        throw ParseError(where + ": meta line allowed only as the first line");
      const json& jm = j.at("meta");
      CorpusMeta meta;
      meta.seed = require_field<std::uint64_t>(jm, "seed", where);
      meta.n_dialogues = require_field<int>(jm, "n_dialogues", where);
      if (jm.contains("profile")) meta.profile = profile_from_json(jm.at("profile"));
      corpus.meta = meta;
      continue;
    }
    corpus.dialogues.push_back(dialogue_from_json(j, where));
  }
  validate(corpus);
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  return read_corpus(in, path);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
  if (corpus.meta) {
    json jm{{"meta",
             {{"seed", corpus.meta->seed},
              {"n_dialogues", corpus.meta->n_dialogues},
              {"profile", profile_to_json(corpus.meta->profile)}}}};
    out << jm.dump() << "\n";
  }
  for (const Dialogue& d : corpus.dialogues) out << dialogue_to_json(d).dump() << "\n";
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  write_corpus(corpus, out);
  if (!out) throw IoError("write failed: " + path);
}

GeneratorProfile load_generator_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open profile file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + std::string(e.what()));
  }
  return profile_from_json(j);
}

void save_generator_profile(const GeneratorProfile& profile, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << profile_to_json(profile).dump(2) << "\n";
}

Corpus generate_corpus(int n_dialogues, std::uint64_t seed,
                       const GeneratorProfile& profile) {
  if (n_dialogues < 1) throw ContractError("generate_corpus: n_dialogues must be >= 1");
  Corpus corpus;
  corpus.meta = CorpusMeta{seed, n_dialogues, profile};
  Rng root(seed);
  for (int di = 0; di < n_dialogues; ++di) {
    Rng rng = root.fork(static_cast<std::uint64_t>(di));
    Dialogue d;
    d.id = "dlg_" + std::to_string(seed) + "_" + std::to_string(di);

    const double lo = profile.target_turns * (1.0 - profile.length_spread);
    const double hi = profile.target_turns * (1.0 + profile.length_spread);
    const int turns = std::max(1, static_cast<int>(std::lround(rng.uniform(lo, hi))));

    int latent = 5;
    bool bottomed = false;
    int opening_failures = 0;
    int worst_burst = 0;
    int running_cap = 5;
    bool prev_failed = false;
    int cooperative_streak = 0;
    int question_streak = 0;
    std::vector<bool> failure_history;
    for (int t = 1; t <= turns; ++t) {
      Exchange e;
      e.turn_index = t;
      const bool success = rng.bernoulli(profile.asr_success_rate);
      if (success) {
        e.asr_status = AsrStatus::kSuccess;
        e.asr_confidence =
            rng.beta(profile.confidence_alpha, profile.confidence_beta);
      } else {
        e.asr_status = rng.bernoulli(profile.no_input_share) ? AsrStatus::kNoInput
                                                             : AsrStatus::kNoMatch;
        e.asr_confidence = 0.0;
      }
      e.is_reprompt = rng.bernoulli(prev_failed ? profile.reprompt_after_failure
                                                : profile.reprompt_spontaneous);
      e.activity_type = rng.bernoulli(profile.question_rate)
                            ? ActivityType::kQuestion
                            : ActivityType::kStatement;
      e.is_confirmation = rng.bernoulli(profile.confirmation_rate);

      question_streak =
          e.activity_type == ActivityType::kQuestion ? question_streak + 1 : 0;
      failure_history.push_back(!success);
      int recent_failures = 0;
      for (std::size_t k = failure_history.size() >= 3 ? failure_history.size() - 3 : 0;
           k < failure_history.size(); ++k)
        if (failure_history[k]) ++recent_failures;
      const bool cooperative = success && !e.is_reprompt &&
                               e.asr_confidence >= profile.low_confidence_threshold;
      cooperative_streak = cooperative ? cooperative_streak + 1 : 0;

      // Latent-satisfaction step, bounded to one label per turn. The first
      // label is pinned to 5. Failure bursts in the recent window hit harder;
      // recovery needs a sustained cooperative run.
      if (t > 1) {
        bool down = false;
        if (!success) down |= rng.bernoulli(profile.p_down_on_failure);
        if (e.is_reprompt) down |= rng.bernoulli(profile.p_down_on_reprompt);
        if (success && e.asr_confidence < profile.low_confidence_threshold)
          down |= rng.bernoulli(profile.p_down_on_low_confidence);
        if (t > profile.overlength_threshold)
          down |= rng.bernoulli(profile.p_down_on_overlength);
        if (recent_failures >= 2) down |= rng.bernoulli(profile.p_down_on_burst);
        if (e.is_confirmation) down |= rng.bernoulli(profile.p_down_on_confirmation);
        if (e.activity_type == ActivityType::kQuestion)
          down |= rng.bernoulli(profile.p_down_on_question);
        if (question_streak >= 3) down |= rng.bernoulli(profile.p_down_on_grilling);
        down |= rng.bernoulli(profile.p_down_baseline);
        if (down) {
          latent = std::max(1, latent - 1);
        } else if (cooperative_streak >= profile.recovery_streak && latent < 5 &&
                   rng.bernoulli(profile.p_recover)) {
          latent += 1;
        }
      }
      if (t <= 2 && !success) ++opening_failures;
      if (latent == 1) bottomed = true;
      worst_burst = std::max(worst_burst, recent_failures);
      int target_cap = bottomed ? profile.scar_cap : 5;
      if (profile.burst_memory && worst_burst >= 2)
        target_cap = std::min(target_cap, 6 - worst_burst);
      if (profile.first_impression_memory && t > 1)
        target_cap = std::min(target_cap, 5 - opening_failures);
      // Caps tighten one level per turn at most, so labels keep the
      // one-step-per-turn contract.
      running_cap = t == 1 ? 5 : std::max(target_cap, running_cap - 1);
      e.iq_label = std::min(latent, running_cap);
      prev_failed = !success;
      d.exchanges.push_back(e);
    }
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

}  // namespace iqlab
