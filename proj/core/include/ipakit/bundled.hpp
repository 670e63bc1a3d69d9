#pragma once

#include <string_view>

// Data files compiled into the library (see core/data/).
namespace ipakit::bundled {

std::string_view ipa_chart_tsv();
std::string_view unification_tsv();
std::string_view features_tsv();
std::string_view modifiers_tsv();

}  // namespace ipakit::bundled
