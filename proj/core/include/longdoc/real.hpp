// Copyright 2026 The longdoc Authors
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

#ifndef LONGDOC_REAL_HPP_
#define LONGDOC_REAL_HPP_

// Storage scalar. The shipped library stores float32; defining
// LONGDOC_REAL_IS_DOUBLE builds the same code over double (used for
// finite-difference gradient checks). The two builds live in different inline
// namespaces so they can be linked into one binary.
#if defined(LONGDOC_REAL_IS_DOUBLE)
#define LONGDOC_ABI real64
#else
#define LONGDOC_ABI real32
#endif

namespace longdoc::inline LONGDOC_ABI {

#if defined(LONGDOC_REAL_IS_DOUBLE)
using Real = double;
#else
using Real = float;
#endif

}  // namespace longdoc::inline LONGDOC_ABI

#endif  // LONGDOC_REAL_HPP_
