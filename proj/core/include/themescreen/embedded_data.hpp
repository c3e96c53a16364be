#pragma once

#include <string_view>

// Versioned data files from core/data, compiled into the library.
namespace themescreen::embedded {

std::string_view markers_json();
std::string_view theme_templates_json();
std::string_view ticl_template_json();
std::string_view feedback_prompt_json();
std::string_view gmean_reference_csv();
std::string_view run_config_defaults_json();

}  // namespace themescreen::embedded
