#pragma once

#include "fairedge/error.hpp"
#include "fairedge/trace.hpp"
#include "fairedge/exitpolicy.hpp"
#include "fairedge/link.hpp"
#include "fairedge/fairopt.hpp"
#include "fairedge/oracle.hpp"
#include "fairedge/scenario.hpp"
