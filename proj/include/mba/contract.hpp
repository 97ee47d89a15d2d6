/*
 * Copyright 2026 The mba-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace mba {

/// Thrown when a caller breaks a documented precondition. Protocol-level bad
/// input (forged, duplicated or malformed messages) never raises this.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace mba

#define MBA_EXPECTS(cond, what)                                                \
    do {                                                                       \
        if (!(cond))                                                           \
            throw ::mba::ContractViolation(std::string("precondition failed: ") \
                                           + (what));                          \
    } while (false)
