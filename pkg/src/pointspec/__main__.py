from pointspec.cli import main

raise SystemExit(main())
