#pragma once

#include "sdstab/symcalc.hpp"
#include "sdstab/lie.hpp"
#include "sdstab/certify.hpp"
#include "sdstab/integrate.hpp"
#include "sdstab/synth.hpp"
#include "sdstab/closed_loop.hpp"
#include "sdstab/io.hpp"
#include "sdstab/cli.hpp"
