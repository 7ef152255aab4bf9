#pragma once

#include <array>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "revbench/corpus.hpp"

namespace revbench {

/// Ten-class joint expert-judgment label for a dually annotated item.
enum class JointClass {
  CorrectSignificantSufficient = 1,
  CorrectSignificantRequiresMore = 2,
  CorrectSignificantDisagreeOnEvidence = 3,
  CorrectMarginalSufficient = 4,
  CorrectMarginalRequiresMore = 5,
  CorrectMarginalDisagreeOnEvidence = 6,
  CorrectNotSignificant = 7,
  CorrectDisagreeOnSignificance = 8,
  Incorrect = 9,
  DisagreeOnCorrectness = 10,
};

inline constexpr std::array<JointClass, 10> kAllJointClasses{
    JointClass::CorrectSignificantSufficient,
    JointClass::CorrectSignificantRequiresMore,
    JointClass::CorrectSignificantDisagreeOnEvidence,
    JointClass::CorrectMarginalSufficient,
    JointClass::CorrectMarginalRequiresMore,
    JointClass::CorrectMarginalDisagreeOnEvidence,
    JointClass::CorrectNotSignificant,
    JointClass::CorrectDisagreeOnSignificance,
    JointClass::Incorrect,
    JointClass::DisagreeOnCorrectness,
};

inline int class_id(JointClass c) { return static_cast<int>(c); }
/// Throws UnknownLabelString outside 1..10.
JointClass joint_class_from_id(int id);
std::string_view to_string(JointClass c);
/// Exact match only; throws UnknownLabelString.
JointClass parse_joint_class(std::string_view label);

/// The label triple of one rating, detached from item and annotator.
struct LabelState {
  Correctness correctness = Correctness::NotCorrect;
  std::optional<Significance> significance;
  std::optional<EvidenceSufficiency> evidence;

  bool operator==(const LabelState&) const = default;
};

LabelState label_state(const AnnotationRecord& a);

/// The six label states the cascade admits.
std::vector<LabelState> legal_label_states();

bool is_fully_positive(const LabelState& s);
bool is_fully_positive(const AnnotationRecord& a);

/// 0 = Not Significant, 1 = Marginally Significant, 2 = Significant; empty
/// for items that are not Correct.
std::optional<int> significance_score(const AnnotationRecord& a);

/// Joint class from two label states. Total and symmetric over legal states.
JointClass joint_class_of(const LabelState& a, const LabelState& b);

/// Joint class of two ratings of one item. Throws SameAnnotator when both
/// rows come from one annotator and InvariantViolation when they rate
/// different items.
JointClass joint_class_of(const AnnotationRecord& a1, const AnnotationRecord& a2);

/// The axis labels a joint class fixes for both annotators; empty fields are
/// not fixed by the class (disagreement or cascade skip).
LabelState consensus_labels(JointClass c);

/// Fraction of fully positive records. Throws EmptyInput.
double fully_positive_rate(const std::vector<AnnotationRecord>& records);

/// An item is fully positive only if every one of its rows is.
bool all_fully_positive(const std::vector<const AnnotationRecord*>& rows);

/// Meta-reviewer axis labels per item.
using MetaLabels = std::map<ItemId, LabelState>;

}  // namespace revbench
