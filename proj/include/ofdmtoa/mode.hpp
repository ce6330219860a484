#pragma once

#include <string>
#include <string_view>

namespace ofdmtoa {

/// Which resources an estimator or bound uses.
enum class Mode { PilotOnly, DataOnly, PilotPlusData, DecisionDirected };

/// "pilot", "data", "pilot+data", "dd".
std::string to_string(Mode mode);
/// Inverse of to_string; throws ParameterError on unknown names.
Mode parse_mode(std::string_view name);

inline bool uses_pilots(Mode m) { return m != Mode::DataOnly; }
inline bool uses_data(Mode m) { return m != Mode::PilotOnly; }

}  // namespace ofdmtoa
