#pragma once

#include <functional>
#include <string>

namespace hdqt {

using WarningSink = std::function<void(const std::string&)>;

// Emits a warning through the active sink (stderr unless replaced).
void warn(const std::string& message);

// Replaces the warning sink and returns the previous one. Passing an empty
// function restores the stderr default.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace hdqt
