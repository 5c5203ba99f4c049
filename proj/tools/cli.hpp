/*
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing,
 *  software distributed under the License is distributed on an "AS
 *  IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either
 *  express or implied.  See the License for the specific language
 *  governing permissions and limitations under the License.
 */


#pragma once

#include <string>
#include <vector>

namespace dbrs::cli {

enum ExitCode : int { ok = 0, failure = 1, usage = 2, not_converged = 3, capacity = 4 };

/// Entry point shared by the binary and the tests.  args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace dbrs::cli
