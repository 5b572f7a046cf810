#pragma once

#include "sdstab/differentiate.hpp"
#include "sdstab/evaluate.hpp"
#include "sdstab/expr.hpp"
#include "sdstab/parser.hpp"
#include "sdstab/simplify.hpp"
