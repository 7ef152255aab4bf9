#include "revbench/rubric.hpp"

#include <string>

#include "revbench/error.hpp"

namespace revbench {

namespace {

constexpr std::array<std::string_view, 10> kLabels{
    "correct_significant_sufficient",
    "correct_significant_requires_more",
    "correct_significant_disagree_on_evidence",
    "correct_marginal_sufficient",
    "correct_marginal_requires_more",
    "correct_marginal_disagree_on_evidence",
    "correct_not_significant",
    "correct_disagree_on_significance",
    "incorrect",
    "disagree_on_correctness",
};

}  // namespace

JointClass joint_class_from_id(int id) {
  if (id < 1 || id > 10) {
    fail(ErrorCode::UnknownLabelString, "joint class id " + std::to_string(id) + " outside 1..10");
  }
  return static_cast<JointClass>(id);
}

std::string_view to_string(JointClass c) { return kLabels[class_id(c) - 1]; }

JointClass parse_joint_class(std::string_view label) {
  for (std::size_t i = 0; i < kLabels.size(); ++i) {
    if (kLabels[i] == label) return static_cast<JointClass>(i + 1);
  }
  fail(ErrorCode::UnknownLabelString, "unknown joint class label '" + std::string(label) + "'");
}

LabelState label_state(const AnnotationRecord& a) {
  return LabelState{a.correctness, a.significance, a.evidence};
}

std::vector<LabelState> legal_label_states() {
  using C = Correctness;
  using S = Significance;
  using E = EvidenceSufficiency;
  return {
      {C::NotCorrect, std::nullopt, std::nullopt},
      {C::Correct, S::NotSignificant, std::nullopt},
      {C::Correct, S::MarginallySignificant, E::Sufficient},
      {C::Correct, S::MarginallySignificant, E::RequiresMore},
      {C::Correct, S::Significant, E::Sufficient},
      {C::Correct, S::Significant, E::RequiresMore},
  };
}

bool is_fully_positive(const LabelState& s) {
  return s.correctness == Correctness::Correct && s.significance == Significance::Significant &&
         s.evidence == EvidenceSufficiency::Sufficient;
}

bool is_fully_positive(const AnnotationRecord& a) { return is_fully_positive(label_state(a)); }

std::optional<int> significance_score(const AnnotationRecord& a) {
  if (a.correctness != Correctness::Correct || !a.significance) return std::nullopt;
  switch (*a.significance) {
    case Significance::NotSignificant: return 0;
    case Significance::MarginallySignificant: return 1;
    case Significance::Significant: return 2;
  }
  return std::nullopt;
}

JointClass joint_class_of(const LabelState& a, const LabelState& b) {
  check_cascade(a.correctness, a.significance, a.evidence);
  check_cascade(b.correctness, b.significance, b.evidence);
  if (a.correctness != b.correctness) return JointClass::DisagreeOnCorrectness;
  if (a.correctness == Correctness::NotCorrect) return JointClass::Incorrect;
  if (*a.significance != *b.significance) return JointClass::CorrectDisagreeOnSignificance;
  switch (*a.significance) {
    case Significance::NotSignificant:
      return JointClass::CorrectNotSignificant;
    case Significance::Significant:
      if (*a.evidence != *b.evidence) return JointClass::CorrectSignificantDisagreeOnEvidence;
      return *a.evidence == EvidenceSufficiency::Sufficient
                 ? JointClass::CorrectSignificantSufficient
                 : JointClass::CorrectSignificantRequiresMore;
    case Significance::MarginallySignificant:
      if (*a.evidence != *b.evidence) return JointClass::CorrectMarginalDisagreeOnEvidence;
      return *a.evidence == EvidenceSufficiency::Sufficient ? JointClass::CorrectMarginalSufficient
                                                            : JointClass::CorrectMarginalRequiresMore;
  }
  fail(ErrorCode::InvariantViolation, "unreachable significance value");
}

JointClass joint_class_of(const AnnotationRecord& a1, const AnnotationRecord& a2) {
  if (a1.annotator_id == a2.annotator_id) {
    fail(ErrorCode::SameAnnotator,
         "both ratings of " + a1.item.str() + " come from annotator " + a1.annotator_id);
  }
  if (a1.item != a2.item) {
    fail(ErrorCode::InvariantViolation,
         "joint class of different items " + a1.item.str() + " and " + a2.item.str());
  }
  return joint_class_of(label_state(a1), label_state(a2));
}

LabelState consensus_labels(JointClass c) {
  using C = Correctness;
  using S = Significance;
  using E = EvidenceSufficiency;
  switch (c) {
    case JointClass::CorrectSignificantSufficient: return {C::Correct, S::Significant, E::Sufficient};
    case JointClass::CorrectSignificantRequiresMore: return {C::Correct, S::Significant, E::RequiresMore};
    case JointClass::CorrectSignificantDisagreeOnEvidence: return {C::Correct, S::Significant, std::nullopt};
    case JointClass::CorrectMarginalSufficient:
      return {C::Correct, S::MarginallySignificant, E::Sufficient};
    case JointClass::CorrectMarginalRequiresMore:
      return {C::Correct, S::MarginallySignificant, E::RequiresMore};
    case JointClass::CorrectMarginalDisagreeOnEvidence:
      return {C::Correct, S::MarginallySignificant, std::nullopt};
    case JointClass::CorrectNotSignificant: return {C::Correct, S::NotSignificant, std::nullopt};
    case JointClass::CorrectDisagreeOnSignificance: return {C::Correct, std::nullopt, std::nullopt};
    case JointClass::Incorrect: return {C::NotCorrect, std::nullopt, std::nullopt};
    case JointClass::DisagreeOnCorrectness: return {};
  }
  return {};
}

double fully_positive_rate(const std::vector<AnnotationRecord>& records) {
  if (records.empty()) fail(ErrorCode::EmptyInput, "fully positive rate of an empty record set");
  std::size_t k = 0;
  for (const auto& r : records) k += is_fully_positive(r) ? 1 : 0;
  return static_cast<double>(k) / static_cast<double>(records.size());
}

bool all_fully_positive(const std::vector<const AnnotationRecord*>& rows) {
  if (rows.empty()) return false;
  for (const auto* r : rows) {
    if (!is_fully_positive(*r)) return false;
  }
  return true;
}

}  // namespace revbench
