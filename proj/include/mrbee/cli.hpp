#ifndef MRBEE_CLI_HPP
#define MRBEE_CLI_HPP

#include <string>
#include <vector>

namespace mrbee::cli {

// Exit codes: 0 success, 2 usage or input error, 3 estimation failure.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);  // args exclude the program name

}  // namespace mrbee::cli

#endif  // MRBEE_CLI_HPP
