#include "iqlab/features.hpp"

#include <cstdio>
#include <ostream>

namespace iqlab {

namespace {

void check_turn(std::span<const Exchange> exchanges, int t) {
  if (t < 1 || t > static_cast<int>(exchanges.size()))
    throw ContractError("turn index out of range: t=" + std::to_string(t) +
                        ", T=" + std::to_string(exchanges.size()));
}

}  // namespace

std::array<double, kExchangeFeatureDim> exchange_features(
    std::span<const Exchange> exchanges, int t) {
  check_turn(exchanges, t);
  const Exchange& e = exchanges[t - 1];
  std::array<double, kExchangeFeatureDim> f{};
  f[0] = e.asr_status == AsrStatus::kSuccess ? 1.0 : 0.0;
  f[1] = e.asr_status == AsrStatus::kNoMatch ? 1.0 : 0.0;
  f[2] = e.asr_status == AsrStatus::kNoInput ? 1.0 : 0.0;
  f[3] = e.asr_confidence;
  f[4] = e.is_reprompt ? 1.0 : 0.0;
  f[5] = e.activity_type == ActivityType::kStatement ? 1.0 : 0.0;
  f[6] = e.activity_type == ActivityType::kQuestion ? 1.0 : 0.0;
  f[7] = e.is_confirmation ? 1.0 : 0.0;
  return f;
}

std::array<double, kExchangeFeatureDim> exchange_features(const Dialogue& d, int t) {
  return exchange_features(std::span<const Exchange>(d.exchanges), t);
}

FeatureVector full_features(std::span<const Exchange> exchanges, int t) {
  check_turn(exchanges, t);
  FeatureVector fv;
  fv.exchange_block = exchange_features(exchanges, t);

  double conf_sum = 0.0;
  int n_success = 0, n_reject = 0;
  for (int i = 0; i < t; ++i) {
    const Exchange& e = exchanges[i];
    if (e.asr_status == AsrStatus::kSuccess) {
      ++n_success;
      conf_sum += e.asr_confidence;
    } else if (e.asr_status == AsrStatus::kNoMatch) {
      ++n_reject;
    }
  }
  fv.n_exchanges = t;
  fv.n_asr_success = n_success;
  fv.rate_asr_success = static_cast<double>(n_success) / t;
  fv.n_asr_rejections = n_reject;
  fv.rate_asr_rejections = static_cast<double>(n_reject) / t;
  fv.mean_asr_confidence = n_success > 0 ? conf_sum / n_success : 0.0;

  const int w0 = std::max(1, t - 2);
  double wconf_sum = 0.0;
  int wn_success = 0, wn_reject = 0, wn_reprompt = 0, wn_question = 0;
  for (int i = w0; i <= t; ++i) {
    const Exchange& e = exchanges[i - 1];
    if (e.asr_status == AsrStatus::kSuccess) {
      ++wn_success;
      wconf_sum += e.asr_confidence;
    } else if (e.asr_status == AsrStatus::kNoMatch) {
      ++wn_reject;
    }
    if (e.is_reprompt) ++wn_reprompt;
    if (e.activity_type == ActivityType::kQuestion) ++wn_question;
  }
  fv.win_asr_success = wn_success;
  fv.win_asr_rejections = wn_reject;
  fv.win_reprompts = wn_reprompt;
  fv.win_system_questions = wn_question;
  fv.win_mean_asr_confidence = wn_success > 0 ? wconf_sum / wn_success : 0.0;
  return fv;
}

FeatureVector full_features(const Dialogue& d, int t) {
  return full_features(std::span<const Exchange>(d.exchanges), t);
}

std::array<double, kFullFeatureDim> FeatureVector::flat() const {
  std::array<double, kFullFeatureDim> out{};
  int k = 0;
  for (double x : exchange_block) out[k++] = x;
  out[k++] = mean_asr_confidence;
  out[k++] = n_exchanges;
  out[k++] = n_asr_success;
  out[k++] = rate_asr_success;
  out[k++] = n_asr_rejections;
  out[k++] = rate_asr_rejections;
  out[k++] = win_mean_asr_confidence;
  out[k++] = win_asr_success;
  out[k++] = win_asr_rejections;
  out[k++] = win_reprompts;
  out[k++] = win_system_questions;
  return out;
}

void write_feature_csv(const Corpus& corpus, std::ostream& out) {
  out << "dialogue_id,t,status_success,status_no_match,status_no_input,"
         "asr_confidence,is_reprompt,activity_statement,activity_question,"
         "is_confirmation,mean_asr_confidence,n_exchanges,n_asr_success,"
         "rate_asr_success,n_asr_rejections,rate_asr_rejections,"
         "win_mean_asr_confidence,win_asr_success,win_asr_rejections,"
         "win_reprompts,win_system_questions,iq\n";
  char buf[32];
  for (const Dialogue& d : corpus.dialogues) {
    for (int t = 1; t <= d.length(); ++t) {
      const FeatureVector fv = full_features(d, t);
      out << d.id << "," << t;
      for (double x : fv.flat()) {
        std::snprintf(buf, sizeof(buf), "%.10g", x);
        out << "," << buf;
      }
      out << "," << d.exchanges[t - 1].iq_label << "\n";
    }
  }
}

}  // namespace iqlab
