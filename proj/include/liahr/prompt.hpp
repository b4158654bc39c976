#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "liahr/corpus.hpp"
#include "liahr/sampler.hpp"
#include "liahr/sampling.hpp"

namespace liahr {

enum class PromptMode { liahr, baseline, icl };

std::string_view to_string(PromptMode mode);
PromptMode prompt_mode_from_string(std::string_view s);

struct DemoSlot {
  std::string id;
  LabelSet labels;
  /// Baseline only: whether this demo is shown as a reasonable pair.
  std::optional<bool> reasonable;
};

/// Declarative description of one prompt.
///
/// For liahr the query is inserted among `demos` at `query_position`
/// (0 = first) carrying `query_label`, and is asked again unlabeled at the
/// end. For baseline `query_label` is the candidate label whose
/// reasonableness is assessed.
struct PromptPlan {
  PromptMode mode = PromptMode::liahr;
  /// Instruction template; placeholders {labels}, {noun}, {positive}.
  std::string instruction;
  std::vector<DemoSlot> demos;
  std::string query;
  std::optional<LabelSet> query_label;
  std::size_t query_position = 0;
  LabelSpacePtr space;
  /// Layout template; placeholders {instruction}, {demo_block}, {query_block}.
  std::string layout;
};

struct RenderedPrompt {
  std::string text;
  PromptPlan plan;
  /// sha256 of text.
  std::string fingerprint;
};

inline constexpr std::string_view kDefaultLayout = "{instruction}\n\n{demo_block}{query_block}";

inline constexpr std::string_view kMultilabelInstruction =
    "Classify the following inputs into none, one, or multiple the following {noun} per input: "
    "{labels}.";
inline constexpr std::string_view kSingleLabelInstruction =
    "Classify the following inputs into one of the following {noun} per input: {labels}.";
inline constexpr std::string_view kBinaryInstruction =
    "Consider whether the following inputs present {positive} or not, and answer with: {labels}.";
inline constexpr std::string_view kBaselineInstruction =
    "Assess the reasonableness of the provided label for each input. Namely, evaluate whether the "
    "label makes sense for its corresponding input, under some reasonable interpretation. Reply "
    "only with unreasonable and reasonable.";

/// Assessment vocabulary of the reasonableness prompt, in instruction order.
inline constexpr std::string_view kUnreasonable = "unreasonable";
inline constexpr std::string_view kReasonable = "reasonable";

/// Task instruction template for a space: its own override if present,
/// else the per-kind default. Baseline prompts always use the
/// reasonableness instruction.
std::string default_instruction(PromptMode mode, const LabelSpace& space);

/// "a", "a and b", "a, b and c".
std::string join_labels_prose(const std::vector<std::string>& names);
/// `{"label": ["a", "b"]}` in space order.
std::string render_label_json(LabelSet set, const LabelSpace& space);
/// "a, b" in space order; "none" for the empty set.
std::string render_label_plain(LabelSet set, const LabelSpace& space);

/// Replaces every {name} occurrence; unknown placeholders are left as-is.
std::string fill_placeholders(std::string_view tmpl,
                              const std::vector<std::pair<std::string, std::string>>& values);

std::string load_template(const std::filesystem::path& path);

/// Renders liahr and icl plans, and baseline plans whose demos are already
/// resolved (every demo has `reasonable` set).
RenderedPrompt render_task_prompt(const PromptPlan& plan, const Corpus& corpus);

/// Resolves a baseline plan: half of the demos keep their gold labels
/// ("reasonable"), the other half get donor-sampled labels
/// ("unreasonable"); which ones is shuffled by `sampler`.
RenderedPrompt render_baseline_prompt(const PromptPlan& plan, const Corpus& corpus,
                                      SeededSampler& sampler,
                                      RandomLabelMode mode = RandomLabelMode::donor);

/// One liahr plan per query position in [0, demos.size()].
std::vector<PromptPlan> position_variants(const PromptPlan& plan);

}  // namespace liahr
