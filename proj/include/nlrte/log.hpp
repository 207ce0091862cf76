#pragma once

#include <functional>
#include <string>

namespace nlrte {

using WarningSink = std::function<void(const std::string&)>;

// Default sink prints "warning: ..." to stderr. Returns the previous sink.
WarningSink set_warning_sink(WarningSink sink);
void warn(const std::string& message);

// Worker count for OpenMP regions: NLRTE_THREADS if set, else the runtime default.
int worker_count();

}  // namespace nlrte
