#pragma once

// Simulated information-seeking dialogue environment: domain ontologies with
// synthetic databases, a rule-based focus belief tracker, summary state and
// action abstraction, an agenda-based user simulator and a semantic error
// model parameterized by the error rate.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iqlab/corpus.hpp"
#include "iqlab/features.hpp"
#include "iqlab/reward.hpp"
#include "iqlab/rng.hpp"

namespace iqlab {

// ---------------------------------------------------------------------------
// Domain model

struct Slot {
  std::string name;
  std::vector<std::string> values;
};

struct Entity {
  std::string name;
  std::map<std::string, std::string> attributes;  // constraint + info slots
};

struct DomainOntology {
  std::string name;
  std::vector<Slot> constraint_slots;
  std::vector<std::string> requestable_slots;
  std::vector<Entity> database;

  const Slot& slot(const std::string& name) const;
  int slot_index(const std::string& name) const;  // -1 when absent
};

// Synthetic presets sized like the benchmark domains:
// CR 3/110, CH 5/33, SR 6/271, SH 6/182, L 6/126 (constraints / DB items).
DomainOntology make_domain_preset(const std::string& code);
std::vector<std::string> domain_preset_codes();

DomainOntology load_domain(const std::string& path);
void save_domain(const DomainOntology& ontology, const std::string& path);

// Checks entity coverage of constraint slots and value membership.
void validate(const DomainOntology& ontology);

struct UserGoal {
  std::map<std::string, std::string> constraints;  // every constraint slot
  std::vector<std::string> requests;               // info slots wanted
  int patience = 15;                               // max exchanges tolerated
};

// Satisfiable by construction: uniform constraint draws are retried against
// the database and fall back to copying a database entity.
UserGoal sample_goal(const DomainOntology& ontology, Rng& rng);

// ---------------------------------------------------------------------------
// Dialogue acts

enum class DialogueActType {
  kHello,
  kRequest,
  kConfirm,
  kInform,
  kSelect,
  kRepeat,
  kBye,
  kNull  // nothing recognized
};

const char* to_string(DialogueActType t);

struct SlotValue {
  std::string slot;
  std::string value;  // empty for a bare slot mention (request)
  bool operator==(const SlotValue&) const = default;
};

struct DialogueAct {
  DialogueActType type = DialogueActType::kNull;
  std::vector<SlotValue> items;
  bool negate = false;  // corrective user inform

  bool operator==(const DialogueAct&) const = default;
};

// A user act after passing through the simulated semantic channel.
struct ObservedAct {
  DialogueAct act;
  AsrStatus status = AsrStatus::kSuccess;
  double confidence = 0.0;
  bool corrupted = false;
};

// ---------------------------------------------------------------------------
// Belief tracking (focus rule)

struct SlotBelief {
  // p[0] is the "unknown" mass; p[1 + k] tracks ontology value k.
  std::vector<double> p;

  int top_value() const;     // index into ontology values; -1 if unknown leads
  double top_prob() const;   // probability of the leading value (not unknown)
  double entropy() const;
};

struct BeliefState {
  std::vector<SlotBelief> slots;  // parallel to ontology constraint slots
  int last_system_act = 0;        // DialogueActType index
  bool offer_made = false;
  std::set<std::string> requested;  // info slots the user asked for (observed)
  std::set<std::string> answered;   // info slots the system has answered

  static BeliefState fresh(const DomainOntology& ontology);
};

// Focus update: per mentioned slot, b'(v) = o(v) + (1 - sum o) * b(v).
// Request items in the act extend the requested set. Malformed slot or value
// names are rejected with ValidationError.
void focus_update(BeliefState& belief, const DomainOntology& ontology,
                  const ObservedAct& observed);

// ---------------------------------------------------------------------------
// Summary space

// Per slot: top-value probability and normalized entropy; then a database
// match-count bucket (4), last system act one-hot (8), offer flag and
// normalized turn counter.
std::vector<double> summarize(const BeliefState& belief,
                              const DomainOntology& ontology, int turn,
                              int turn_cap);
int summary_dim(const DomainOntology& ontology);

struct SummaryAction {
  enum Kind {
    kHello,
    kRequestSlot,
    kConfirmSlot,
    kSelectSlot,
    kInformOffer,
    kInformAlternatives,
    kInformCount,
    kInformRequested,
    kRepeat,
    kBye
  } kind = kHello;
  int slot = -1;  // constraint slot index for the per-slot kinds

  std::string label(const DomainOntology& ontology) const;
};

// Per-slot request/confirm/select plus seven global actions; the inventory
// size lands between 16 and 25 for 3 to 6 constraint slots.
std::vector<SummaryAction> action_inventory(const DomainOntology& ontology);

// Coherence mask: confirm/select need evidence on the slot, alternatives and
// requested-info answers need a prior offer.
std::vector<bool> action_mask(const BeliefState& belief,
                              const DomainOntology& ontology);

std::vector<int> matching_entities(const BeliefState& belief,
                                   const DomainOntology& ontology);

// ---------------------------------------------------------------------------
// Agenda-based user simulator

struct UserSimState {
  UserGoal goal;
  std::deque<DialogueAct> agenda;  // informs first, then requests
  std::set<std::string> answered_requests;
  std::string accepted_offer;  // entity name that matched the goal
  DialogueAct previous_act;

  static UserSimState init(const UserGoal& goal);
};

// Deterministic agenda rules; rng only breaks idle-turn choices.
DialogueAct user_respond(UserSimState& user, const DialogueAct& system_act,
                         Rng& rng);

// ---------------------------------------------------------------------------
// Semantic error model

struct ErrorModelConfig {
  // Corruption flavor split, conditional on a corruption happening.
  double p_substitute_value = 0.5;
  double p_confuse_act = 0.2;
  double p_no_match = 0.2;
  double p_no_input = 0.1;
  // Confidence draws. The distributions overlap: a corrupted hypothesis can
  // still look fairly confident, which is what makes noise hurt.
  double clean_alpha = 4.0, clean_beta = 2.0;
  double corrupt_alpha = 2.5, corrupt_beta = 3.0;
};

ObservedAct corrupt(const DialogueAct& act, double ser,
                    const DomainOntology& ontology,
                    const ErrorModelConfig& config, Rng& rng);

// ---------------------------------------------------------------------------
// Episode loop

// Chooses a summary-action index given the summary state and mask.
using ActionSelector =
    std::function<int(std::span<const double> summary, const std::vector<bool>& mask)>;

// Maps the observable exchange stream to a final-turn IQ estimate in [1,5].
// An empty stream (dialogue aborted before any user turn) scores 1.
using IqScorer = std::function<int(const std::vector<Exchange>&)>;

struct TurnRecord {
  std::vector<double> summary;  // state the policy saw
  int action_index = -1;        // chosen summary action
  DialogueAct system_act;
  DialogueAct user_act;       // before the semantic channel
  ObservedAct observed;       // after the semantic channel
  Exchange exchange;          // observable feature record
  double reward = 0.0;
};

struct EpisodeResult {
  std::vector<TurnRecord> turns;
  bool success = false;
  double reward_sum = 0.0;
  int final_iq = 0;  // 0 when no IQ scorer drove the reward
  UserGoal goal;     // simulation oracle, never visible to estimators

  int length() const { return static_cast<int>(turns.size()); }
  // The estimator-facing stream. A system-initiated bye has no user turn,
  // so it contributes no exchange; a dialogue aborted on its first turn has
  // an empty stream.
  std::vector<Exchange> exchanges() const;
  Dialogue to_dialogue(std::string id) const;
};

struct EpisodeConfig {
  RewardSpec reward;
  double ser = 0.0;
  ErrorModelConfig error_model;
  int turn_cap = 25;
};

// Runs one dialogue. The IQ scorer is required for IQ-based reward kinds and
// is evaluated once, on the final turn. Exchange features are derived only
// from observable quantities; the goal is used solely for the user simulator
// and the success oracle.
EpisodeResult run_episode(const ActionSelector& select_action,
                          const DomainOntology& ontology,
                          const EpisodeConfig& config, Rng& rng,
                          const IqScorer* iq_scorer = nullptr,
                          const UserGoal* fixed_goal = nullptr);

// Hand-written policy that requests every slot, offers, answers requests and
// closes. Succeeds deterministically at zero error rate.
ActionSelector make_scripted_policy(const DomainOntology& ontology);

}  // namespace iqlab
