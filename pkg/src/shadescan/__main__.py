from shadescan.cli import main

raise SystemExit(main())
