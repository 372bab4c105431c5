#include "hdqt/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace hdqt {

namespace {

std::mutex sink_mutex;
WarningSink active_sink;

}  // namespace

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex);
    if (active_sink) {
        active_sink(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

WarningSink set_warning_sink(WarningSink sink) {
    std::lock_guard lock(sink_mutex);
    return std::exchange(active_sink, std::move(sink));
}

}  // namespace hdqt
