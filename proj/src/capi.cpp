#include "ucsim/types.hpp"
extern "C" const char* ucsim_version(void) { return "0.1.0"; }
