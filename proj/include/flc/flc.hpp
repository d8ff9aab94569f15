#pragma once

#include "flc/ast.hpp"
#include "flc/bench.hpp"
#include "flc/builtins.hpp"
#include "flc/compile.hpp"
#include "flc/diagnostics.hpp"
#include "flc/emit.hpp"
#include "flc/exec.hpp"
#include "flc/inverse.hpp"
#include "flc/kalman.hpp"
#include "flc/lower.hpp"
#include "flc/ode.hpp"
#include "flc/optimize.hpp"
#include "flc/parser.hpp"
#include "flc/project.hpp"
#include "flc/symdiff.hpp"
#include "flc/tape.hpp"
#include "flc/typecheck.hpp"
#include "flc/types.hpp"
#include "flc/value.hpp"
