#pragma once

#include "ternroll/core.hpp"
#include "ternroll/cse.hpp"
#include "ternroll/image.hpp"
#include "ternroll/matrix_io.hpp"
#include "ternroll/netlist.hpp"
#include "ternroll/network.hpp"
#include "ternroll/pipeline.hpp"
#include "ternroll/serial.hpp"
#include "ternroll/ternarize.hpp"
#include "ternroll/throughput.hpp"
#include "ternroll/treegen.hpp"
