#include "iqlab/dialenv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace iqlab {

using nlohmann::json;

// Belief mass a slot needs before it constrains database matching.
constexpr double kFillThreshold = 0.5;

const Slot& DomainOntology::slot(const std::string& slot_name) const {
  const int idx = slot_index(slot_name);
  if (idx < 0) throw ValidationError("unknown constraint slot: " + slot_name);
  return constraint_slots[idx];
}

int DomainOntology::slot_index(const std::string& slot_name) const {
  for (std::size_t i = 0; i < constraint_slots.size(); ++i)
    if (constraint_slots[i].name == slot_name) return static_cast<int>(i);
  return -1;
}

void validate(const DomainOntology& ontology) {
  if (ontology.constraint_slots.empty())
    throw ValidationError("ontology has no constraint slots");
  for (const Entity& e : ontology.database) {
    for (const Slot& s : ontology.constraint_slots) {
      const auto it = e.attributes.find(s.name);
      if (it == e.attributes.end())
        throw ValidationError("entity " + e.name + " missing slot " + s.name);
      if (std::find(s.values.begin(), s.values.end(), it->second) == s.values.end())
        throw ValidationError("entity " + e.name + " has out-of-ontology value for " +
                              s.name);
    }
  }
}

namespace {

struct PresetSpec {
  const char* code;
  std::vector<std::pair<const char*, int>> slots;  // name, value count
  int db_items;
};

const std::vector<PresetSpec>& preset_table() {
  static const std::vector<PresetSpec> presets = {
      {"CR", {{"food", 5}, {"area", 5}, {"price", 4}}, 110},
      {"CH", {{"area", 4}, {"price", 4}, {"stars", 4}, {"kind", 3}, {"parking", 2}}, 33},
      {"SR",
       {{"food", 6}, {"area", 5}, {"price", 4}, {"kids", 2}, {"meal", 4}, {"near", 4}},
       271},
      {"SH",
       {{"area", 5}, {"price", 4}, {"stars", 4}, {"dogs", 2}, {"internet", 2},
        {"cards", 2}},
       182},
      {"L",
       {{"family", 5}, {"price", 4}, {"drive", 3}, {"weight", 3}, {"battery", 3},
        {"business", 2}},
       126},
  };
  return presets;
}

}  // namespace

std::vector<std::string> domain_preset_codes() {
  std::vector<std::string> codes;
  for (const PresetSpec& p : preset_table()) codes.push_back(p.code);
  return codes;
}

DomainOntology make_domain_preset(const std::string& code) {
  const PresetSpec* spec = nullptr;
  for (const PresetSpec& p : preset_table())
    if (code == p.code) spec = &p;
  if (spec == nullptr) throw ValidationError("unknown domain preset: " + code);

  DomainOntology ontology;
  ontology.name = code;
  for (const auto& [slot_name, n_values] : spec->slots) {
    Slot s;
    s.name = slot_name;
    for (int v = 0; v < n_values; ++v)
      s.values.push_back(std::string(slot_name) + "_" + std::string(1, char('a' + v)));
    ontology.constraint_slots.push_back(std::move(s));
  }
  ontology.requestable_slots = {"phone", "address", "postcode"};

  std::uint64_t seed = 0xd0a41;
  for (char c : code) seed = seed * 131 + static_cast<unsigned char>(c);
  Rng rng(seed);
  for (int i = 0; i < spec->db_items; ++i) {
    Entity e;
    char name[32];
    std::snprintf(name, sizeof(name), "%s_e%03d", code.c_str(), i);
    e.name = name;
    for (const Slot& s : ontology.constraint_slots) {
      const int v = rng.uniform_int(0, static_cast<int>(s.values.size()) - 1);
      e.attributes[s.name] = s.values[v];
    }
    char phone[32];
    std::snprintf(phone, sizeof(phone), "555-%04d", i);
    e.attributes["phone"] = phone;
    e.attributes["address"] = "addr_" + std::to_string(i);
    e.attributes["postcode"] = "pc_" + std::to_string(i);
    ontology.database.push_back(std::move(e));
  }
  validate(ontology);
  return ontology;
}

DomainOntology load_domain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open domain file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + std::string(e.what()));
  }
  DomainOntology ontology;
  try {
    ontology.name = j.at("name").get<std::string>();
    for (const json& js : j.at("constraint_slots")) {
      Slot s;
      s.name = js.at("name").get<std::string>();
      for (const json& jv : js.at("values")) s.values.push_back(jv.get<std::string>());
      ontology.constraint_slots.push_back(std::move(s));
    }
    for (const json& jr : j.at("requestable_slots"))
      ontology.requestable_slots.push_back(jr.get<std::string>());
    for (const json& je : j.at("database")) {
      Entity e;
      e.name = je.at("name").get<std::string>();
      for (const auto& [k, v] : je.at("attributes").items())
        e.attributes[k] = v.get<std::string>();
      ontology.database.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(path + ": malformed domain file: " + std::string(e.what()));
  }
  validate(ontology);
  return ontology;
}

void save_domain(const DomainOntology& ontology, const std::string& path) {
  json slots = json::array();
  for (const Slot& s : ontology.constraint_slots)
    slots.push_back(json{{"name", s.name}, {"values", s.values}});
  json db = json::array();
  for (const Entity& e : ontology.database)
    db.push_back(json{{"name", e.name}, {"attributes", e.attributes}});
  const json j{{"name", ontology.name},
               {"constraint_slots", std::move(slots)},
               {"requestable_slots", ontology.requestable_slots},
               {"database", std::move(db)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

UserGoal sample_goal(const DomainOntology& ontology, Rng& rng) {
  UserGoal goal;
  bool satisfiable = false;
  for (int attempt = 0; attempt < 50 && !satisfiable; ++attempt) {
    goal.constraints.clear();
    for (const Slot& s : ontology.constraint_slots) {
      const int v = rng.uniform_int(0, static_cast<int>(s.values.size()) - 1);
      goal.constraints[s.name] = s.values[v];
    }
    satisfiable = std::any_of(
        ontology.database.begin(), ontology.database.end(), [&](const Entity& e) {
          for (const auto& [slot, value] : goal.constraints)
            if (e.attributes.at(slot) != value) return false;
          return true;
        });
  }
  if (!satisfiable) {
    // Rare for small value sets; copy a database entity instead.
    const Entity& e = ontology.database[rng.uniform_int(
        0, static_cast<int>(ontology.database.size()) - 1)];
    for (const Slot& s : ontology.constraint_slots)
      goal.constraints[s.name] = e.attributes.at(s.name);
  }
  const int n_requests = rng.uniform_int(1, 2);
  std::vector<std::string> pool = ontology.requestable_slots;
  rng.shuffle(pool);
  goal.requests.assign(pool.begin(), pool.begin() + std::min<std::size_t>(n_requests, pool.size()));
  std::sort(goal.requests.begin(), goal.requests.end());
  goal.patience = rng.uniform_int(10, 20);
  return goal;
}

const char* to_string(DialogueActType t) {
  switch (t) {
    case DialogueActType::kHello: return "hello";
    case DialogueActType::kRequest: return "request";
    case DialogueActType::kConfirm: return "confirm";
    case DialogueActType::kInform: return "inform";
    case DialogueActType::kSelect: return "select";
    case DialogueActType::kRepeat: return "repeat";
    case DialogueActType::kBye: return "bye";
    case DialogueActType::kNull: return "null";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Belief tracking

int SlotBelief::top_value() const {
  int best = -1;
  double best_p = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > best_p) {
      best_p = p[k];
      best = static_cast<int>(k) - 1;
    }
  return best;
}

double SlotBelief::top_prob() const {
  double best = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k) best = std::max(best, p[k]);
  return best;
}

double SlotBelief::entropy() const {
  double h = 0.0;
  for (double x : p)
    if (x > 1e-300) h -= x * std::log(x);
  return h;
}

BeliefState BeliefState::fresh(const DomainOntology& ontology) {
  BeliefState b;
  for (const Slot& s : ontology.constraint_slots) {
    SlotBelief sb;
    sb.p.assign(s.values.size() + 1, 0.0);
    sb.p[0] = 1.0;  // everything starts unknown
    b.slots.push_back(std::move(sb));
  }
  b.last_system_act = static_cast<int>(DialogueActType::kNull);
  return b;
}

void focus_update(BeliefState& belief, const DomainOntology& ontology,
                  const ObservedAct& observed) {
  if (observed.confidence < 0.0 || observed.confidence > 1.0)
    throw ContractError("focus_update: confidence outside [0,1]");
  const DialogueAct& act = observed.act;
  if (act.type == DialogueActType::kNull) return;

  for (const SlotValue& item : act.items) {
    if (item.value.empty()) {
      // Bare slot mention: the user requests an info slot.
      if (act.type == DialogueActType::kRequest) {
        if (std::find(ontology.requestable_slots.begin(),
                      ontology.requestable_slots.end(),
                      item.slot) == ontology.requestable_slots.end())
          throw ValidationError("request for unknown info slot: " + item.slot);
        belief.requested.insert(item.slot);
      }
      continue;
    }
    if (act.type != DialogueActType::kInform) continue;
    const int si = ontology.slot_index(item.slot);
    if (si < 0) throw ValidationError("inform for unknown slot: " + item.slot);
    const Slot& slot = ontology.constraint_slots[si];
    const auto vit = std::find(slot.values.begin(), slot.values.end(), item.value);
    if (vit == slot.values.end())
      throw ValidationError("inform with out-of-ontology value: " + item.value);
    const int vi = static_cast<int>(vit - slot.values.begin());

    SlotBelief& sb = belief.slots[si];
    const double evidence = observed.confidence;
    for (double& x : sb.p) x *= 1.0 - evidence;
    sb.p[vi + 1] += evidence;
  }
}

// ---------------------------------------------------------------------------
// Summary space

std::vector<int> matching_entities(const BeliefState& belief,
                                   const DomainOntology& ontology) {
  std::vector<std::pair<std::string, std::string>> filled;
  for (std::size_t si = 0; si < belief.slots.size(); ++si) {
    const SlotBelief& sb = belief.slots[si];
    if (sb.top_prob() >= kFillThreshold) {
      const Slot& slot = ontology.constraint_slots[si];
      filled.emplace_back(slot.name, slot.values[sb.top_value()]);
    }
  }
  std::vector<int> matches;
  for (std::size_t ei = 0; ei < ontology.database.size(); ++ei) {
    const Entity& e = ontology.database[ei];
    bool ok = true;
    for (const auto& [slot, value] : filled)
      if (e.attributes.at(slot) != value) {
        ok = false;
        break;
      }
    if (ok) matches.push_back(static_cast<int>(ei));
  }
  return matches;
}

int summary_dim(const DomainOntology& ontology) {
  return 2 * static_cast<int>(ontology.constraint_slots.size()) + 4 + 8 + 2;
}

std::vector<double> summarize(const BeliefState& belief,
                              const DomainOntology& ontology, int turn,
                              int turn_cap) {
  std::vector<double> s;
  s.reserve(summary_dim(ontology));
  for (const SlotBelief& sb : belief.slots) {
    s.push_back(sb.top_prob());
    s.push_back(sb.entropy() / std::log(static_cast<double>(sb.p.size())));
  }
  const std::size_t matches = matching_entities(belief, ontology).size();
  double bucket[4] = {0, 0, 0, 0};
  if (matches == 0)
    bucket[0] = 1;
  else if (matches == 1)
    bucket[1] = 1;
  else if (matches <= 4)
    bucket[2] = 1;
  else
    bucket[3] = 1;
  s.insert(s.end(), bucket, bucket + 4);
  for (int a = 0; a < 8; ++a)
    s.push_back(belief.last_system_act == a ? 1.0 : 0.0);
  s.push_back(belief.offer_made ? 1.0 : 0.0);
  s.push_back(static_cast<double>(turn) / std::max(1, turn_cap));
  return s;
}

std::string SummaryAction::label(const DomainOntology& ontology) const {
  const auto slot_name = [&]() { return ontology.constraint_slots[slot].name; };
  switch (kind) {
    case kHello: return "hello";
    case kRequestSlot: return "request_" + slot_name();
    case kConfirmSlot: return "confirm_" + slot_name();
    case kSelectSlot: return "select_" + slot_name();
    case kInformOffer: return "inform_offer";
    case kInformAlternatives: return "inform_alternatives";
    case kInformCount: return "inform_count";
    case kInformRequested: return "inform_requested";
    case kRepeat: return "repeat";
    case kBye: return "bye";
  }
  return "?";
}

std::vector<SummaryAction> action_inventory(const DomainOntology& ontology) {
  std::vector<SummaryAction> actions;
  const int n_slots = static_cast<int>(ontology.constraint_slots.size());
  for (int s = 0; s < n_slots; ++s) actions.push_back({SummaryAction::kRequestSlot, s});
  for (int s = 0; s < n_slots; ++s) actions.push_back({SummaryAction::kConfirmSlot, s});
  for (int s = 0; s < n_slots; ++s) actions.push_back({SummaryAction::kSelectSlot, s});
  for (auto kind : {SummaryAction::kHello, SummaryAction::kInformOffer,
                    SummaryAction::kInformAlternatives, SummaryAction::kInformCount,
                    SummaryAction::kInformRequested, SummaryAction::kRepeat,
                    SummaryAction::kBye})
    actions.push_back({kind, -1});
  return actions;
}

std::vector<bool> action_mask(const BeliefState& belief,
                              const DomainOntology& ontology) {
  const std::vector<SummaryAction> actions = action_inventory(ontology);
  std::vector<bool> mask(actions.size(), true);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const SummaryAction& a = actions[i];
    switch (a.kind) {
      case SummaryAction::kConfirmSlot:
      case SummaryAction::kSelectSlot:
        mask[i] = belief.slots[a.slot].top_prob() > 1e-9;
        break;
      case SummaryAction::kInformAlternatives:
      case SummaryAction::kInformRequested:
        mask[i] = belief.offer_made;
        break;
      default:
        break;
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Agenda-based user simulator

UserSimState UserSimState::init(const UserGoal& goal) {
  UserSimState user;
  user.goal = goal;
  for (const auto& [slot, value] : goal.constraints)
    user.agenda.push_back(
        DialogueAct{DialogueActType::kInform, {{slot, value}}, false});
  for (const std::string& r : goal.requests)
    user.agenda.push_back(DialogueAct{DialogueActType::kRequest, {{r, ""}}, false});
  return user;
}

namespace {

DialogueAct user_bye() { return DialogueAct{DialogueActType::kBye, {}, false}; }

DialogueAct inform_goal(const UserSimState& user, const std::string& slot,
                        bool negate) {
  return DialogueAct{DialogueActType::kInform,
                     {{slot, user.goal.constraints.at(slot)}},
                     negate};
}

// Next thing the user wants once an acceptable offer is on the table.
DialogueAct next_request_or_done(UserSimState& user) {
  for (const std::string& r : user.goal.requests)
    if (!user.answered_requests.contains(r))
      return DialogueAct{DialogueActType::kRequest, {{r, ""}}, false};
  return user_bye();
}

DialogueAct pop_agenda(UserSimState& user, Rng& rng) {
  if (!user.agenda.empty()) {
    DialogueAct act = user.agenda.front();
    user.agenda.pop_front();
    return act;
  }
  if (!user.accepted_offer.empty()) return next_request_or_done(user);
  // Idle: restate a random goal constraint.
  auto it = user.goal.constraints.begin();
  std::advance(it, rng.uniform_int(0, static_cast<int>(user.goal.constraints.size()) - 1));
  return inform_goal(user, it->first, false);
}

void drop_agenda_inform(UserSimState& user, const std::string& slot) {
  std::erase_if(user.agenda, [&](const DialogueAct& a) {
    return a.type == DialogueActType::kInform && !a.items.empty() &&
           a.items[0].slot == slot;
  });
}

void drop_agenda_request(UserSimState& user, const std::string& slot) {
  std::erase_if(user.agenda, [&](const DialogueAct& a) {
    return a.type == DialogueActType::kRequest && !a.items.empty() &&
           a.items[0].slot == slot;
  });
}

}  // namespace

DialogueAct user_respond(UserSimState& user, const DialogueAct& system_act,
                         Rng& rng) {
  DialogueAct response;
  switch (system_act.type) {
    case DialogueActType::kHello:
      response = pop_agenda(user, rng);
      break;
    case DialogueActType::kRequest: {
      const std::string& slot = system_act.items.at(0).slot;
      if (user.goal.constraints.contains(slot)) {
        drop_agenda_inform(user, slot);
        response = inform_goal(user, slot, false);
      } else {
        response = pop_agenda(user, rng);
      }
      break;
    }
    case DialogueActType::kConfirm: {
      const SlotValue& sv = system_act.items.at(0);
      if (!user.goal.constraints.contains(sv.slot)) {
        response = pop_agenda(user, rng);
      } else if (user.goal.constraints.at(sv.slot) == sv.value) {
        response = inform_goal(user, sv.slot, false);  // affirm by restating
      } else {
        drop_agenda_inform(user, sv.slot);
        response = inform_goal(user, sv.slot, true);  // negate + correct value
      }
      break;
    }
    case DialogueActType::kSelect: {
      const std::string& slot = system_act.items.at(0).slot;
      if (user.goal.constraints.contains(slot)) {
        drop_agenda_inform(user, slot);
        response = inform_goal(user, slot, false);
      } else {
        response = pop_agenda(user, rng);
      }
      break;
    }
    case DialogueActType::kInform: {
      std::string offered_name;
      bool violated = false;
      std::string violated_slot;
      for (const SlotValue& sv : system_act.items) {
        if (sv.slot == "name") {
          offered_name = sv.value;
        } else if (user.goal.constraints.contains(sv.slot)) {
          if (user.goal.constraints.at(sv.slot) != sv.value && !violated) {
            violated = true;
            violated_slot = sv.slot;
          }
        }
      }
      if (!offered_name.empty() && !violated) user.accepted_offer = offered_name;
      // Info values count once an acceptable offer is on the table, whether
      // they arrive bundled with it or on their own.
      bool answered_any = false;
      if (!user.accepted_offer.empty() && !violated) {
        for (const SlotValue& sv : system_act.items) {
          if (std::find(user.goal.requests.begin(), user.goal.requests.end(),
                        sv.slot) != user.goal.requests.end()) {
            user.answered_requests.insert(sv.slot);
            drop_agenda_request(user, sv.slot);
            answered_any = true;
          }
        }
      }
      if (!offered_name.empty() && violated) {
        response = inform_goal(user, violated_slot, true);
      } else if (!offered_name.empty() || answered_any) {
        response = next_request_or_done(user);
      } else {
        response = pop_agenda(user, rng);
      }
      break;
    }
    case DialogueActType::kBye:
      // The user hangs up only once they are done; a premature goodbye is
      // answered with whatever they still need.
      if (!user.accepted_offer.empty()) {
        response = next_request_or_done(user);
      } else {
        response = pop_agenda(user, rng);
      }
      break;
    case DialogueActType::kRepeat:
    case DialogueActType::kNull:
      response = user.previous_act.type == DialogueActType::kNull
                     ? pop_agenda(user, rng)
                     : user.previous_act;
      break;
  }
  user.previous_act = response;
  return response;
}

// ---------------------------------------------------------------------------
// Semantic error model

ObservedAct corrupt(const DialogueAct& act, double ser,
                    const DomainOntology& ontology,
                    const ErrorModelConfig& config, Rng& rng) {
  if (ser < 0.0 || ser > 1.0) throw ContractError("corrupt: ser outside [0,1]");
  ObservedAct out;
  out.act = act;
  if (!rng.bernoulli(ser)) {
    out.status = AsrStatus::kSuccess;
    out.confidence = rng.beta(config.clean_alpha, config.clean_beta);
    out.corrupted = false;
    return out;
  }
  out.corrupted = true;

  double flavor = rng.uniform();
  // Acts with no substitutable value fall through to act confusion.
  auto substitutable = [&]() {
    for (const SlotValue& sv : act.items)
      if (!sv.value.empty() && ontology.slot_index(sv.slot) >= 0) return true;
    return false;
  };
  const double p_sub = config.p_substitute_value;
  const double p_conf = config.p_confuse_act;
  const double p_nm = config.p_no_match;
  const double total = p_sub + p_conf + p_nm + config.p_no_input;
  flavor *= total;

  if (flavor < p_sub && substitutable()) {
    // Replace one mentioned value with another from the same slot.
    std::vector<int> candidates;
    for (int i = 0; i < static_cast<int>(act.items.size()); ++i)
      if (!act.items[i].value.empty() && ontology.slot_index(act.items[i].slot) >= 0)
        candidates.push_back(i);
    const int pick = candidates[rng.uniform_int(0, static_cast<int>(candidates.size()) - 1)];
    const Slot& slot = ontology.slot(out.act.items[pick].slot);
    if (slot.values.size() > 1) {
      std::string replacement;
      do {
        replacement = slot.values[rng.uniform_int(0, static_cast<int>(slot.values.size()) - 1)];
      } while (replacement == act.items[pick].value);
      out.act.items[pick].value = replacement;
    }
    out.status = AsrStatus::kSuccess;
    out.confidence = rng.beta(config.corrupt_alpha, config.corrupt_beta);
    return out;
  }
  if (flavor < p_sub + p_conf) {
    // Act-type confusion: evidence is lost or distorted.
    switch (act.type) {
      case DialogueActType::kInform:
        out.act.type = DialogueActType::kRequest;
        for (SlotValue& sv : out.act.items) sv.value.clear();
        // A garbled constraint mention is not an info request; drop items
        // that are not requestable slots.
        std::erase_if(out.act.items, [&](const SlotValue& sv) {
          return std::find(ontology.requestable_slots.begin(),
                           ontology.requestable_slots.end(),
                           sv.slot) == ontology.requestable_slots.end();
        });
        if (out.act.items.empty()) out.act.type = DialogueActType::kNull;
        break;
      default:
        out.act = DialogueAct{DialogueActType::kNull, {}, false};
        break;
    }
    if (out.act.type == DialogueActType::kNull) {
      out.status = AsrStatus::kNoMatch;
      out.confidence = 0.0;
    } else {
      out.status = AsrStatus::kSuccess;
      out.confidence = rng.beta(config.corrupt_alpha, config.corrupt_beta);
    }
    return out;
  }
  if (flavor < p_sub + p_conf + p_nm) {
    out.act = DialogueAct{DialogueActType::kNull, {}, false};
    out.status = AsrStatus::kNoMatch;
    out.confidence = 0.0;
    return out;
  }
  out.act = DialogueAct{DialogueActType::kNull, {}, false};
  out.status = AsrStatus::kNoInput;
  out.confidence = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Episode loop

std::vector<Exchange> EpisodeResult::exchanges() const {
  std::vector<Exchange> out;
  out.reserve(turns.size());
  for (const TurnRecord& t : turns) {
    // The closing handshake has no real user input; a refused goodbye does.
    if (t.system_act.type == DialogueActType::kBye &&
        t.user_act.type == DialogueActType::kBye)
      continue;
    Exchange e = t.exchange;
    e.turn_index = static_cast<int>(out.size()) + 1;
    out.push_back(e);
  }
  return out;
}

Dialogue EpisodeResult::to_dialogue(std::string id) const {
  Dialogue d;
  d.id = std::move(id);
  d.exchanges = exchanges();
  return d;
}

namespace {

// Concretizer state shared across the episode.
struct SystemState {
  DialogueAct previous_act{DialogueActType::kNull, {}, false};
  std::vector<std::string> offered_names;
  std::string last_offer;
};

DialogueAct offer_act(const Entity& e, const DomainOntology& ontology) {
  // Offers are proactive: the venue is presented with its constraint values
  // and the info slots, the way a helpful system reads out a result.
  DialogueAct act{DialogueActType::kInform, {{"name", e.name}}, false};
  for (const Slot& s : ontology.constraint_slots)
    act.items.push_back({s.name, e.attributes.at(s.name)});
  for (const std::string& r : ontology.requestable_slots)
    act.items.push_back({r, e.attributes.at(r)});
  return act;
}

const Entity* pick_offer(const BeliefState& belief, const DomainOntology& ontology,
                         SystemState& sys, bool alternatives) {
  const std::vector<int> matches = matching_entities(belief, ontology);
  if (alternatives) {
    for (int idx : matches) {
      const std::string& name = ontology.database[idx].name;
      if (std::find(sys.offered_names.begin(), sys.offered_names.end(), name) ==
          sys.offered_names.end())
        return &ontology.database[idx];
    }
  }
  if (!matches.empty()) return &ontology.database[matches.front()];
  // Best effort: entity agreeing with the most filled slots.
  const Entity* best = nullptr;
  int best_score = -1;
  for (const Entity& e : ontology.database) {
    int score = 0;
    for (std::size_t si = 0; si < belief.slots.size(); ++si) {
      const SlotBelief& sb = belief.slots[si];
      if (sb.top_prob() >= kFillThreshold &&
          e.attributes.at(ontology.constraint_slots[si].name) ==
              ontology.constraint_slots[si].values[sb.top_value()])
        ++score;
    }
    if (score > best_score) {
      best_score = score;
      best = &e;
    }
  }
  return best;
}

DialogueAct concretize(const SummaryAction& action, const BeliefState& belief,
                       const DomainOntology& ontology, SystemState& sys) {
  switch (action.kind) {
    case SummaryAction::kHello:
      return {DialogueActType::kHello, {}, false};
    case SummaryAction::kRequestSlot:
      return {DialogueActType::kRequest,
              {{ontology.constraint_slots[action.slot].name, ""}},
              false};
    case SummaryAction::kConfirmSlot: {
      const Slot& slot = ontology.constraint_slots[action.slot];
      const int v = std::max(0, belief.slots[action.slot].top_value());
      return {DialogueActType::kConfirm, {{slot.name, slot.values[v]}}, false};
    }
    case SummaryAction::kSelectSlot: {
      const Slot& slot = ontology.constraint_slots[action.slot];
      const SlotBelief& sb = belief.slots[action.slot];
      const int top = std::max(0, sb.top_value());
      int second = -1;
      double second_p = -1.0;
      for (std::size_t k = 1; k < sb.p.size(); ++k) {
        const int vi = static_cast<int>(k) - 1;
        if (vi != top && sb.p[k] > second_p) {
          second_p = sb.p[k];
          second = vi;
        }
      }
      if (second < 0) second = top == 0 ? std::min<int>(1, slot.values.size() - 1) : 0;
      return {DialogueActType::kSelect,
              {{slot.name, slot.values[top]}, {slot.name, slot.values[second]}},
              false};
    }
    case SummaryAction::kInformOffer:
    case SummaryAction::kInformAlternatives: {
      const Entity* e = pick_offer(belief, ontology, sys,
                                   action.kind == SummaryAction::kInformAlternatives);
      sys.last_offer = e->name;
      if (std::find(sys.offered_names.begin(), sys.offered_names.end(), e->name) ==
          sys.offered_names.end())
        sys.offered_names.push_back(e->name);
      return offer_act(*e, ontology);
    }
    case SummaryAction::kInformCount: {
      const std::size_t n = matching_entities(belief, ontology).size();
      return {DialogueActType::kInform, {{"count", std::to_string(n)}}, false};
    }
    case SummaryAction::kInformRequested: {
      if (sys.last_offer.empty())
        return {DialogueActType::kInform, {{"count", "0"}}, false};
      const Entity* entity = nullptr;
      for (const Entity& e : ontology.database)
        if (e.name == sys.last_offer) entity = &e;
      DialogueAct act{DialogueActType::kInform, {{"name", entity->name}}, false};
      for (const std::string& r : belief.requested)
        if (!belief.answered.contains(r))
          act.items.push_back({r, entity->attributes.at(r)});
      return act;
    }
    case SummaryAction::kRepeat:
      return sys.previous_act.type == DialogueActType::kNull
                 ? DialogueAct{DialogueActType::kHello, {}, false}
                 : sys.previous_act;
    case SummaryAction::kBye:
      return {DialogueActType::kBye, {}, false};
  }
  throw ContractError("concretize: unknown action kind");
}

bool entity_matches_goal(const Entity& e, const UserGoal& goal) {
  for (const auto& [slot, value] : goal.constraints)
    if (e.attributes.at(slot) != value) return false;
  return true;
}

Exchange make_exchange(int t, const DialogueAct& system_act,
                       const DialogueAct& previous_system_act,
                       const ObservedAct& observed) {
  Exchange e;
  e.turn_index = t;
  e.asr_status = observed.status;
  e.asr_confidence = observed.confidence;
  e.is_reprompt = t > 1 && system_act == previous_system_act;
  const bool question = system_act.type == DialogueActType::kRequest ||
                        system_act.type == DialogueActType::kConfirm ||
                        system_act.type == DialogueActType::kSelect;
  e.activity_type = question ? ActivityType::kQuestion : ActivityType::kStatement;
  e.is_confirmation = system_act.type == DialogueActType::kConfirm;
  e.iq_label = 3;  // placeholder; live dialogues carry no annotation
  return e;
}

}  // namespace

EpisodeResult run_episode(const ActionSelector& select_action,
                          const DomainOntology& ontology,
                          const EpisodeConfig& config, Rng& rng,
                          const IqScorer* iq_scorer, const UserGoal* fixed_goal) {
  const bool iq_reward = config.reward.kind != RewardKind::kTaskSuccess;
  if (iq_reward && iq_scorer == nullptr)
    throw ContractError("run_episode: IQ-based reward requires an IQ scorer");

  EpisodeResult episode;
  episode.goal = fixed_goal ? *fixed_goal : sample_goal(ontology, rng);
  UserSimState user = UserSimState::init(episode.goal);
  BeliefState belief = BeliefState::fresh(ontology);
  const std::vector<SummaryAction> inventory = action_inventory(ontology);
  SystemState sys;

  bool matching_offer = false;
  std::set<std::string> oracle_answered;

  for (int t = 1; t <= config.turn_cap; ++t) {
    const std::vector<double> summary = summarize(belief, ontology, t, config.turn_cap);
    const std::vector<bool> mask = action_mask(belief, ontology);
    const int ai = select_action(summary, mask);
    if (ai < 0 || ai >= static_cast<int>(inventory.size()) || !mask[ai])
      throw ContractError("run_episode: selector returned a masked action");
    const SummaryAction& action = inventory[ai];
    const DialogueAct system_act = concretize(action, belief, ontology, sys);

    // Oracle bookkeeping for the success flag: any named inform about an
    // entity that matches the goal counts, along with the info slots it
    // carries (offers are proactive and bundle them).
    std::string informed_name;
    for (const SlotValue& sv : system_act.items)
      if (sv.slot == "name") informed_name = sv.value;
    if (system_act.type == DialogueActType::kInform && !informed_name.empty()) {
      for (const Entity& e : ontology.database) {
        if (e.name == informed_name && entity_matches_goal(e, episode.goal)) {
          matching_offer = true;
          for (const SlotValue& sv : system_act.items)
            if (sv.slot != "name") oracle_answered.insert(sv.slot);
        }
      }
    }

    const DialogueAct user_act = user_respond(user, system_act, rng);
    const ObservedAct observed =
        corrupt(user_act, config.ser, ontology, config.error_model, rng);
    focus_update(belief, ontology, observed);
    if (system_act.type == DialogueActType::kInform)
      for (const SlotValue& sv : system_act.items)
        if (sv.slot != "name" && sv.slot != "count" &&
            ontology.slot_index(sv.slot) < 0)
          belief.answered.insert(sv.slot);
    belief.last_system_act = static_cast<int>(system_act.type);
    if (action.kind == SummaryAction::kInformOffer ||
        action.kind == SummaryAction::kInformAlternatives)
      belief.offer_made = true;

    TurnRecord record;
    record.summary = summary;
    record.action_index = ai;
    record.system_act = system_act;
    record.user_act = user_act;
    record.observed = observed;
    record.exchange = make_exchange(t, system_act, sys.previous_act, observed);
    episode.turns.push_back(std::move(record));
    sys.previous_act = system_act;

    // The user ends the dialogue: by agreeing to a goodbye, hanging up on
    // their own, or running out of patience.
    const bool user_gone = user_act.type == DialogueActType::kBye ||
                           static_cast<int>(episode.turns.size()) >= episode.goal.patience;
    if (user_gone || t == config.turn_cap) break;
  }

  bool all_answered = true;
  for (const std::string& r : episode.goal.requests)
    if (!oracle_answered.contains(r)) all_answered = false;
  episode.success = matching_offer && all_answered;

  EpisodeOutcome outcome;
  outcome.length = episode.length();
  outcome.success = episode.success;
  outcome.final_iq = iq_scorer ? (*iq_scorer)(episode.exchanges()) : 1;
  if (iq_scorer) episode.final_iq = outcome.final_iq;

  for (std::size_t i = 0; i < episode.turns.size(); ++i) {
    const bool final_turn = i + 1 == episode.turns.size();
    episode.turns[i].reward =
        per_turn_reward(config.reward, final_turn, final_turn ? &outcome : nullptr);
    episode.reward_sum += episode.turns[i].reward;
  }
  return episode;
}

ActionSelector make_scripted_policy(const DomainOntology& ontology) {
  struct Script {
    int n_slots;
    bool offered = false;
  };
  auto state = std::make_shared<Script>();
  state->n_slots = static_cast<int>(ontology.constraint_slots.size());
  const int offer_index = 3 * state->n_slots + 1;       // kInformOffer
  const int requested_index = 3 * state->n_slots + 4;   // kInformRequested

  return [state, offer_index, requested_index](std::span<const double> summary,
                                               const std::vector<bool>&) -> int {
    if (!state->offered) {
      for (int s = 0; s < state->n_slots; ++s) {
        if (summary[2 * s] < 0.6) return s;  // request slot s again
      }
      state->offered = true;
      return offer_index;
    }
    return requested_index;
  };
}

}  // namespace iqlab
