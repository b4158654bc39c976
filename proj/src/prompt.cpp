#include "liahr/prompt.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "liahr/error.hpp"
#include "liahr/hash.hpp"

namespace liahr {

std::string_view to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::liahr: return "liahr";
    case PromptMode::baseline: return "baseline";
    case PromptMode::icl: return "icl";
  }
  return "?";
}

PromptMode prompt_mode_from_string(std::string_view s) {
  if (s == "liahr") return PromptMode::liahr;
  if (s == "baseline") return PromptMode::baseline;
  if (s == "icl") return PromptMode::icl;
  throw ConfigError("unknown prompt mode '" + std::string(s) + "'");
}

std::string default_instruction(PromptMode mode, const LabelSpace& space) {
  if (mode == PromptMode::baseline) return std::string(kBaselineInstruction);
  if (space.instruction()) return *space.instruction();
  switch (space.kind()) {
    case TaskKind::multilabel: return std::string(kMultilabelInstruction);
    case TaskKind::single_label: return std::string(kSingleLabelInstruction);
    case TaskKind::binary: return std::string(kBinaryInstruction);
  }
  return {};
}

std::string join_labels_prose(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += (i + 1 == names.size()) ? " and " : ", ";
    out += names[i];
  }
  return out;
}

std::string render_label_json(LabelSet set, const LabelSpace& space) {
  std::string out = "{\"label\": [";
  bool first = true;
  for (const auto& name : space.names(set)) {
    if (!first) out += ", ";
    first = false;
    out += nlohmann::json(name).dump();
  }
  out += "]}";
  return out;
}

std::string render_label_plain(LabelSet set, const LabelSpace& space) {
  if (set.empty()) return "none";
  std::string out;
  for (const auto& name : space.names(set)) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

std::string fill_placeholders(std::string_view tmpl,
                              const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    bool replaced = false;
    if (close != std::string_view::npos) {
      const auto key = tmpl.substr(open + 1, close - open - 1);
      for (const auto& [k, v] : values) {
        if (k == key) {
          out += v;
          pos = close + 1;
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) {
      out += '{';
      pos = open + 1;
    }
  }
  return out;
}

std::string load_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

std::string input_line(const std::string& text) { return "Input: `" + text + "`"; }

/// Labeled block for one demo. Binary spaces use the assessment form.
std::string labeled_block(const std::string& text, LabelSet labels, const LabelSpace& space) {
  if (space.kind() == TaskKind::binary) {
    return input_line(text) + "\nAssessment: " + render_label_plain(labels, space);
  }
  return input_line(text) + "\n" + render_label_json(labels, space);
}

std::string baseline_block(const std::string& text, LabelSet labels, const LabelSpace& space,
                           bool reasonable) {
  return input_line(text) + "\nLabel: " + render_label_plain(labels, space) +
         "\nAssessment: " + std::string(reasonable ? kReasonable : kUnreasonable);
}

void check_plan(const PromptPlan& plan, const Corpus& corpus) {
  if (!plan.space) throw ValidationError("prompt plan has no label space");
  const auto& space = *plan.space;
  corpus.get(plan.query);
  for (const auto& d : plan.demos) {
    corpus.get(d.id);
    space.validate(d.labels);
    if (plan.mode != PromptMode::baseline && d.id == plan.query) {
      throw ValidationError("query '" + plan.query + "' must not also be a regular demo");
    }
  }
  if (plan.mode != PromptMode::icl) {
    if (!plan.query_label) {
      throw ValidationError(std::string(to_string(plan.mode)) + " plan needs a query label");
    }
    space.validate(*plan.query_label);
  }
  if (plan.mode == PromptMode::liahr && plan.query_position > plan.demos.size()) {
    throw ValidationError("query position " + std::to_string(plan.query_position) +
                          " out of range [0, " + std::to_string(plan.demos.size()) + "]");
  }
}

std::string instruction_text(const PromptPlan& plan) {
  const auto& space = *plan.space;
  const auto tmpl = plan.instruction.empty() ? default_instruction(plan.mode, space) : plan.instruction;
  return fill_placeholders(tmpl, {{"labels", join_labels_prose(space.labels())},
                                  {"noun", space.noun()},
                                  {"positive", space.binary_positive().value_or("")}});
}

}  // namespace

RenderedPrompt render_task_prompt(const PromptPlan& plan, const Corpus& corpus) {
  check_plan(plan, corpus);
  const auto& space = *plan.space;
  const auto& query = corpus.get(plan.query);

  std::string demo_block;
  std::string query_block;
  auto append = [&](std::string block) {
    demo_block += block;
    demo_block += "\n\n";
  };

  switch (plan.mode) {
    case PromptMode::liahr:
    case PromptMode::icl: {
      for (std::size_t i = 0; i <= plan.demos.size(); ++i) {
        if (plan.mode == PromptMode::liahr && i == plan.query_position) {
          append(labeled_block(query.text, *plan.query_label, space));
        }
        if (i < plan.demos.size()) {
          const auto& d = plan.demos[i];
          append(labeled_block(corpus.get(d.id).text, d.labels, space));
        }
      }
      query_block = input_line(query.text);
      if (space.kind() == TaskKind::binary) query_block += "\nAssessment:";
      break;
    }
    case PromptMode::baseline: {
      for (const auto& d : plan.demos) {
        if (!d.reasonable) {
          throw ValidationError("baseline demo '" + d.id + "' has no assessment; resolve it first");
        }
        append(baseline_block(corpus.get(d.id).text, d.labels, space, *d.reasonable));
      }
      query_block = input_line(query.text) + "\nLabel: " +
                    render_label_plain(*plan.query_label, space) + "\nAssessment: ";
      break;
    }
  }

  const std::string_view layout = plan.layout.empty() ? kDefaultLayout : std::string_view(plan.layout);
  RenderedPrompt out;
  out.text = fill_placeholders(layout, {{"instruction", instruction_text(plan)},
                                        {"demo_block", demo_block},
                                        {"query_block", query_block}});
  out.plan = plan;
  out.fingerprint = sha256_hex(out.text);
  return out;
}

RenderedPrompt render_baseline_prompt(const PromptPlan& plan, const Corpus& corpus,
                                      SeededSampler& sampler, RandomLabelMode mode) {
  if (plan.mode != PromptMode::baseline) {
    throw ValidationError("render_baseline_prompt needs a baseline plan");
  }
  if (plan.demos.size() % 2 != 0) {
    throw ValidationError("baseline needs an even number of shots, got " +
                          std::to_string(plan.demos.size()));
  }
  std::vector<char> reasonable(plan.demos.size(), 0);
  std::fill(reasonable.begin(), reasonable.begin() + static_cast<std::ptrdiff_t>(plan.demos.size() / 2), 1);
  sampler.shuffle(std::span<char>(reasonable));

  PromptPlan resolved = plan;
  for (std::size_t i = 0; i < resolved.demos.size(); ++i) {
    auto& d = resolved.demos[i];
    d.reasonable = reasonable[i] != 0;
    if (!*d.reasonable) d.labels = sample_random_labels(corpus, corpus.get(d.id), sampler, mode);
  }
  return render_task_prompt(resolved, corpus);
}

std::vector<PromptPlan> position_variants(const PromptPlan& plan) {
  if (plan.mode != PromptMode::liahr) {
    throw ValidationError("position variants only apply to liahr plans");
  }
  std::vector<PromptPlan> out;
  out.reserve(plan.demos.size() + 1);
  for (std::size_t p = 0; p <= plan.demos.size(); ++p) {
    auto v = plan;
    v.query_position = p;
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace liahr
