#include "ofdmtoa/mode.hpp"

#include "ofdmtoa/errors.hpp"

namespace ofdmtoa {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::PilotOnly: return "pilot";
    case Mode::DataOnly: return "data";
    case Mode::PilotPlusData: return "pilot+data";
    case Mode::DecisionDirected: return "dd";
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  if (name == "pilot" || name == "pilot-only") return Mode::PilotOnly;
  if (name == "data" || name == "data-only") return Mode::DataOnly;
  if (name == "pilot+data" || name == "pilot-plus-data") return Mode::PilotPlusData;
  if (name == "dd") return Mode::DecisionDirected;
  throw ParameterError("unknown mode '" + std::string(name) + "'");
}

}  // namespace ofdmtoa
