use super::{ActionId, BasicAction, MatchConfig};

/// Turns one decision into per-frame engine inputs.
///
/// A basic action is held for every frame. A combo is keyed in as its
/// three-press trigger on consecutive frames, after which the finisher is held.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputScript {
    keys: [BasicAction; 3],
    len: usize,
    cursor: usize,
}

impl InputScript {
    pub fn new(action: ActionId, cfg: &MatchConfig) -> Self {
        match action {
            ActionId::Basic(b) => InputScript {
                keys: [b; 3],
                len: 1,
                cursor: 0,
            },
            ActionId::Combo(id) => {
                let trigger = cfg
                    .combo(id)
                    .map(|c| c.trigger)
                    .unwrap_or([BasicAction::Idle; 3]);
                InputScript {
                    keys: trigger,
                    len: 3,
                    cursor: 0,
                }
            }
        }
    }

    pub fn idle() -> Self {
        InputScript {
            keys: [BasicAction::Idle; 3],
            len: 1,
            cursor: 0,
        }
    }

    pub fn next_input(&mut self) -> ActionId {
        let key = self.keys[self.cursor.min(self.len - 1)];
        self.cursor += 1;
        ActionId::Basic(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combo_expands_then_holds_finisher() {
        let cfg = MatchConfig::default();
        let mut s = InputScript::new(ActionId::Combo(1), &cfg);
        let keys: Vec<ActionId> = (0..5).map(|_| s.next_input()).collect();
        use BasicAction::*;
        let expect: Vec<ActionId> = [Defend, Up, Jump, Jump, Jump].into_iter().map(ActionId::Basic).collect();
        assert_eq!(keys, expect);
    }

    #[test]
    fn basic_is_held() {
        let cfg = MatchConfig::default();
        let mut s = InputScript::new(ActionId::Basic(BasicAction::Left), &cfg);
        for _ in 0..4 {
            assert_eq!(s.next_input(), ActionId::Basic(BasicAction::Left));
        }
    }
}
