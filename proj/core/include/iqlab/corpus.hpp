#pragma once

// IQ-annotated dialogue data: domain types, a JSON-lines reader/writer and a
// synthetic corpus generator driven by a latent-satisfaction process.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "iqlab/errors.hpp"

namespace iqlab {

enum class AsrStatus { kSuccess, kNoMatch, kNoInput };
enum class ActivityType { kStatement, kQuestion };

const char* to_string(AsrStatus s);
const char* to_string(ActivityType t);
AsrStatus asr_status_from_string(const std::string& s);
ActivityType activity_type_from_string(const std::string& s);

// One system-user exchange. asr_confidence is 0 whenever the status is not
// Success; iq_label is the annotated quality of the dialogue up to this turn.
struct Exchange {
  int turn_index = 1;  // 1-based
  AsrStatus asr_status = AsrStatus::kSuccess;
  double asr_confidence = 0.0;
  bool is_reprompt = false;
  ActivityType activity_type = ActivityType::kStatement;
  bool is_confirmation = false;
  int iq_label = 5;  // in [1, 5]

  bool operator==(const Exchange&) const = default;
};

struct Dialogue {
  std::string id;
  std::vector<Exchange> exchanges;  // turn_index values 1..T consecutive

  int length() const { return static_cast<int>(exchanges.size()); }
  bool operator==(const Dialogue&) const = default;
};

// Event probabilities for the synthetic generator. Defaults are calibrated
// to roughly 24 turns per dialogue.
struct GeneratorProfile {
  double asr_success_rate = 0.78;
  double no_input_share = 0.3;  // among ASR failures
  double reprompt_after_failure = 0.7;
  double reprompt_spontaneous = 0.05;
  double question_rate = 0.6;
  double confirmation_rate = 0.3;
  double confidence_alpha = 5.0;  // Beta draw for successful recognitions
  double confidence_beta = 1.8;
  double target_turns = 24.0;
  double length_spread = 0.4;  // dialogue length uniform in target*(1 +- spread)

  // Latent-satisfaction dynamics: each negative event independently risks a
  // -1 step; recovery requires a run of cooperative turns, and failure
  // bursts inside the recent window hit harder than isolated ones.
  double p_down_on_failure = 0.85;
  double p_down_on_reprompt = 0.25;
  double p_down_on_low_confidence = 0.15;
  double low_confidence_threshold = 0.4;
  double p_down_on_overlength = 0.08;
  int overlength_threshold = 18;
  double p_down_on_burst = 0.5;  // two or more failures in the last 3 turns
  double p_down_on_confirmation = 0.12;  // confirmation fatigue
  double p_down_on_question = 0.10;      // mild per-question fatigue
  double p_down_on_grilling = 0.5;       // three questions back to back
  double p_down_baseline = 0.10;         // ambient skepticism, recoverable
  double p_recover = 0.65;
  int recovery_streak = 2;  // consecutive cooperative turns needed to recover
  // Peak-end and primacy memory: the label never climbs past a cap set by
  // the worst moment of the dialogue so far, and caps tighten by at most one
  // level per turn. Bottoming out caps at scar_cap; the worst failure burst
  // inside any 3-turn window caps at 6 - worst_burst; failures among the
  // opening two exchanges anchor the dialogue at 5 minus the failure count.
  int scar_cap = 3;  // 5 disables bottom-out scarring
  bool burst_memory = true;
  bool first_impression_memory = true;

  bool operator==(const GeneratorProfile&) const = default;
};

struct CorpusMeta {
  std::uint64_t seed = 0;
  int n_dialogues = 0;
  GeneratorProfile profile;

  bool operator==(const CorpusMeta&) const = default;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  std::optional<CorpusMeta> meta;  // present for generated corpora

  std::size_t total_exchanges() const;
  bool operator==(const Corpus&) const = default;
};

// Validates invariants: non-empty dialogues, consecutive 1-based turn
// indices, unique ids, confidence/status coupling, labels in range.
// Throws ValidationError with the offending dialogue/field named.
void validate(const Corpus& corpus);

// JSON-lines format: one dialogue object per line. An optional leading
// {"meta": ...} line carries the generator record for generated corpora.
Corpus load_corpus(const std::string& path);
Corpus read_corpus(std::istream& in, const std::string& origin = "<stream>");
void save_corpus(const Corpus& corpus, const std::string& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

GeneratorProfile load_generator_profile(const std::string& path);
void save_generator_profile(const GeneratorProfile& profile, const std::string& path);

// Deterministic in (n_dialogues, seed, profile). Every trajectory starts at
// IQ 5 and moves by at most one label per turn.
Corpus generate_corpus(int n_dialogues, std::uint64_t seed,
                       const GeneratorProfile& profile = {});

}  // namespace iqlab
