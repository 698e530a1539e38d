#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avm/types.hpp"

namespace avm::textmine {

// Keyword extraction over free-text listing descriptions. All matching is
// case-insensitive and deterministic: text is normalized (lowercased,
// punctuation folded to spaces, "m²" -> "m2") before any rule runs.

std::string normalize(std::string_view text);

/// Property type from the keyword table. Precedence when several match:
/// end-of-terrace > semi-detached > terraced > townhouse > detached >
/// duplex > apartment, so longer phrases are never shadowed by substrings.
std::optional<PropertyType> extract_property_type(std::string_view text);

enum class CountKind { Beds, Baths };

/// Room counts. Each keyword occurrence (bed/bedroom(s); bath/bathroom(s),
/// wc, ensuite) contributes the numeral or word-number ("one".."ten")
/// immediately before it, or 1 when it appears bare. No occurrence -> none;
/// totals above 20 are treated as text-mining noise -> none.
std::optional<int> extract_count(std::string_view text, CountKind kind);

/// Floor area in m^2. The first "<number> sqm/sq m/m2/square metres" match
/// wins; otherwise all "<a> m x <b> m" room dimensions are summed. Results
/// outside the 10-2000 m^2 plausibility gate -> none.
std::optional<double> extract_size(std::string_view text);

/// "BER <token>" with token on the 15-level scale; Unknown otherwise.
Ber extract_ber(std::string_view text);

/// One flag per Table-2 descriptor, each from its synonym/misspelling list.
FeatureFlags extract_features(std::string_view text);

/// True when the description matches the commercial-property exclusion list
/// (extra entries may come from config).
bool looks_commercial(std::string_view text,
                      const std::vector<std::string>& extra_keywords = {});

}  // namespace avm::textmine
