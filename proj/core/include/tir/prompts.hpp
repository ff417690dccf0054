#pragma once

#include <string>
#include <string_view>

namespace tir::prompts {

inline constexpr std::string_view kPromptVersion = "v1";

/// Policy system prompt (versioned asset under core/assets/prompts).
std::string_view policy_system_prompt();

/// Judge prompt with {question}, {output} and {ground_truth} placeholders.
std::string_view judge_prompt_template();

std::string render_judge_prompt(std::string_view question, std::string_view output,
                                std::string_view ground_truth);

}  // namespace tir::prompts
