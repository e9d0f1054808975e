// Copyright 2026 The cem Authors
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


// Umbrella header.

#pragma once

#include "cem/adapter.hpp"
#include "cem/ast.hpp"
#include "cem/change_analyzer.hpp"
#include "cem/compatibility.hpp"
#include "cem/error.hpp"
#include "cem/parser.hpp"
#include "cem/registry.hpp"
#include "cem/runtime.hpp"
#include "cem/scenario.hpp"
#include "cem/snapshot.hpp"
#include "cem/typechecker.hpp"
#include "cem/types.hpp"
#include "cem/typing.hpp"
#include "cem/wire.hpp"
