#include "nlrte/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nlrte {

namespace {

std::mutex sink_mutex;

WarningSink& sink() {
    static WarningSink s = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return s;
}

}  // namespace

WarningSink set_warning_sink(WarningSink s) {
    std::lock_guard lock(sink_mutex);
    auto prev = std::move(sink());
    sink() = std::move(s);
    return prev;
}

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex);
    if (sink()) sink()(message);
}

int worker_count() {
    if (const char* env = std::getenv("NLRTE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace nlrte
