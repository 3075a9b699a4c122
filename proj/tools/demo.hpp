#ifndef RKME_TOOLS_DEMO_HPP
#define RKME_TOOLS_DEMO_HPP

#include <cstdint>
#include <iosfwd>

namespace rkme::tools {

// End-to-end synthetic walkthrough: generate three provider datasets, train
// and upload a learnware for each, then run both deployment modes against
// fresh test draws. Prints a JSON report on `out`.
void run_toy_demo(std::uint64_t seed, std::ostream& out);

} // namespace rkme::tools

#endif
