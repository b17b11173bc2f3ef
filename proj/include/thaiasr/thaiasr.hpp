// thaiasr.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Umbrella header for the library modules (the CLI lives in cli.hpp).

#ifndef THAIASR_THAIASR_HPP_
#define THAIASR_THAIASR_HPP_

#include "thaiasr/corpus.hpp"
#include "thaiasr/ctc.hpp"
#include "thaiasr/emissions.hpp"
#include "thaiasr/error.hpp"
#include "thaiasr/lm.hpp"
#include "thaiasr/metrics.hpp"
#include "thaiasr/splitter.hpp"
#include "thaiasr/textnorm.hpp"
#include "thaiasr/tokenizer.hpp"
#include "thaiasr/unicode.hpp"
#include "thaiasr/version.hpp"

#endif  // THAIASR_THAIASR_HPP_
